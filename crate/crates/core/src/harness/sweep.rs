//! α-sweeps: each `α` is classified by shrinking the concentration radius of
//! the data and running a refinement study, and bisection narrows the
//! transition between blow-up and boundedness.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    config_hash, default_label, read, simulate, to_json, write_file, write_manifest, GridConfig,
    Manifest, ModelConfig, MomentSettings, RunConfig, VERSION,
};
use crate::error::{Error, Result};
use crate::initdata::{InitialProfile, ProfileKind};
use crate::solver_w::{RunOutcome, RunStatus, SolverControls};

/// Largest relative change of `t_est` between consecutive grids that still
/// counts as a converged blow-up time.
pub const BLOWUP_REFINEMENT_TOL: f64 = 0.05;

/// Largest relative change of `sup u` between grids that counts as bounded.
pub const BOUNDED_REFINEMENT_TOL: f64 = 0.01;

/// Fraction of the horizon over which a bounded run's `sup u` must not grow.
pub const BOUNDED_TAIL_FRACTION: f64 = 0.2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum AlphaSelection {
    List { values: Vec<f64> },
    Bisection { lo: f64, hi: f64, tol: f64 },
}

fn default_grids() -> Vec<usize> {
    vec![1024, 2048]
}

fn default_r0_min() -> f64 {
    1e-6
}

fn default_r0_ratio() -> f64 {
    10f64.sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    #[serde(default = "default_label")]
    pub label: String,
    pub model: ModelConfig,
    pub alphas: AlphaSelection,
    /// Initial data; for an indicator the radius is the first of the
    /// concentration candidates.
    pub profile: InitialProfile,
    /// Cell counts of the refinement study, coarse to fine.
    #[serde(default = "default_grids")]
    pub grids: Vec<usize>,
    /// Explicit concentration radii to try, largest first.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r0_candidates: Option<Vec<f64>>,
    /// Smallest radius of the automatic candidate list.
    #[serde(default = "default_r0_min")]
    pub r0_min: f64,
    /// Ratio between consecutive automatic candidates.
    #[serde(default = "default_r0_ratio")]
    pub r0_ratio: f64,
    #[serde(default)]
    pub horizon: Horizon,
    #[serde(default)]
    pub controls: SolverControls,
}

/// How the integration horizon of a sweep run is chosen.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "policy", rename_all = "snake_case", deny_unknown_fields)]
pub enum Horizon {
    /// Always `controls.t_end`.
    Fixed,
    /// `min(controls.t_end, factor · r0²)`: concentrated data evolve on the
    /// diffusive time scale of their radius. Snapshot spacing scales along.
    Diffusive { factor: f64 },
}

impl Default for Horizon {
    fn default() -> Self {
        Horizon::Diffusive { factor: 20.0 }
    }
}

impl Horizon {
    pub fn controls(&self, base: &SolverControls, r0: Option<f64>) -> SolverControls {
        let (Horizon::Diffusive { factor }, Some(r0)) = (self, r0) else {
            return base.clone();
        };
        let t_end = base.t_end.min(factor * r0 * r0);
        let scale = t_end / base.t_end;
        SolverControls {
            t_end,
            snapshot_interval: base.snapshot_interval * scale,
            dt_max: base.dt_max * scale,
            ..base.clone()
        }
    }
}

impl SweepConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&read(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.grids.len() < 2 {
            return Err(Error::Config(
                "a refinement study needs at least two grids".into(),
            ));
        }
        if self.grids.windows(2).any(|p| p[1] <= p[0]) {
            return Err(Error::Config("grids must be listed coarse to fine".into()));
        }
        match &self.alphas {
            AlphaSelection::List { values } if values.is_empty() => {
                return Err(Error::Config("alpha list is empty".into()));
            }
            AlphaSelection::Bisection { lo, hi, tol } if !(lo < hi && *tol > 0.0) => {
                return Err(Error::Config(format!(
                    "bisection needs lo < hi and tol > 0, got [{lo}, {hi}] tol {tol}"
                )));
            }
            _ => {}
        }
        if !(self.r0_min > 0.0 && self.r0_ratio > 1.0) {
            return Err(Error::Config("need r0_min > 0 and r0_ratio > 1".into()));
        }
        self.controls.validate()
    }

    /// Concentration radii to try, largest first.
    pub fn candidates(&self) -> Vec<Option<f64>> {
        let ProfileKind::Indicator { r0, .. } = self.profile.kind else {
            return vec![None];
        };
        if let Some(list) = &self.r0_candidates {
            return list.iter().copied().map(Some).collect();
        }
        let mut out = Vec::new();
        let mut r = r0;
        while r >= self.r0_min * (1.0 - 1e-9) {
            out.push(Some(r));
            r /= self.r0_ratio;
        }
        out
    }

    fn run_config(&self, alpha: f64, r0: Option<f64>, cells: usize) -> RunConfig {
        let profile = match (r0, &self.profile.kind) {
            (Some(r0), ProfileKind::Indicator { edge_fraction, .. }) => {
                InitialProfile::new(ProfileKind::Indicator {
                    r0,
                    edge_fraction: *edge_fraction,
                })
            }
            _ => self.profile.clone(),
        };
        RunConfig {
            label: format!("{}-a{alpha}-n{cells}", self.label),
            model: self.model.with_alpha(alpha),
            grid: GridConfig {
                cells,
                grading: None,
            },
            profile,
            controls: self.horizon.controls(&self.controls, r0),
            moments: MomentSettings::default(),
        }
    }
}

/// Outcome of one grid of one attempt.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridRun {
    pub cells: usize,
    pub status: RunStatus,
    pub sup_u_max: f64,
    pub tail_nonincreasing: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Attempt {
    pub r0: Option<f64>,
    pub runs: Vec<GridRun>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum Verdict {
    Blowup {
        t_est: f64,
        refinement_delta: f64,
        r0: Option<f64>,
    },
    Bounded {
        sup_u_max: f64,
    },
    Inconclusive {
        reason: String,
    },
}

impl Verdict {
    pub fn is_blowup(&self) -> bool {
        matches!(self, Verdict::Blowup { .. })
    }

    pub fn is_bounded(&self) -> bool {
        matches!(self, Verdict::Bounded { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlphaResult {
    pub alpha: f64,
    pub verdict: Verdict,
    pub attempts: Vec<Attempt>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub version: String,
    pub config_hash: String,
    /// Results ordered by `α`.
    pub results: Vec<AlphaResult>,
    /// `[lo, hi]` with a blow-up verdict at `lo` and a bounded one at `hi`.
    pub bracket: Option<(f64, f64)>,
    pub note: Option<String>,
}

/// `sup u` does not grow over the final fraction of the horizon, up to a
/// relative slack of `1e-9`.
pub fn tail_nonincreasing(outcome: &RunOutcome, fraction: f64) -> bool {
    let t_end = outcome.final_time();
    let start = t_end * (1.0 - fraction);
    let tail: Vec<f64> = outcome
        .series
        .iter()
        .filter(|r| r.t >= start)
        .map(|r| r.sup_u)
        .collect();
    tail.len() >= 2 && tail.windows(2).all(|p| p[1] <= p[0] * (1.0 + 1e-9))
}

fn grid_run(cells: usize, outcome: &RunOutcome) -> GridRun {
    GridRun {
        cells,
        status: outcome.status.clone(),
        sup_u_max: outcome.sup_u_max(),
        tail_nonincreasing: matches!(outcome.status, RunStatus::CompletedHorizon)
            && tail_nonincreasing(outcome, BOUNDED_TAIL_FRACTION),
    }
}

fn simulate_grid(
    sweep: &SweepConfig,
    alpha: f64,
    r0: Option<f64>,
    cells: usize,
) -> Result<GridRun> {
    let sim = simulate(&sweep.run_config(alpha, r0, cells))?;
    Ok(grid_run(cells, &sim.outcome))
}

fn rel_change(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs())
}

/// Largest relative change of `t_est` between consecutive grids, if every
/// grid blew up.
fn blowup_delta(runs: &[GridRun]) -> Option<(f64, f64)> {
    let times: Option<Vec<f64>> = runs
        .iter()
        .map(|r| match r.status {
            RunStatus::BlowupDetected { t_est, .. } => Some(t_est),
            _ => None,
        })
        .collect();
    let times = times?;
    let delta = times
        .windows(2)
        .map(|p| rel_change(p[0], p[1]))
        .fold(0.0, f64::max);
    Some((*times.last()?, delta))
}

/// Classifies one `α` by shrinking the concentration radius until a
/// refinement-stable blow-up is seen.
pub fn classify_alpha(sweep: &SweepConfig, alpha: f64) -> Result<AlphaResult> {
    let mut attempts = Vec::new();
    let mut all_bounded = true;
    let mut sup_max: f64 = 0.0;
    let mut blowup_seen = false;
    for r0 in sweep.candidates() {
        let coarse = match simulate_grid(sweep, alpha, r0, sweep.grids[0]) {
            Ok(run) => run,
            // e.g. a radius the grid cannot resolve
            Err(Error::Domain(reason)) => {
                all_bounded = false;
                attempts.push(Attempt {
                    r0,
                    runs: vec![],
                    error: Some(reason),
                });
                continue;
            }
            Err(e) => return Err(e),
        };
        let mut runs = vec![coarse];
        match runs[0].status {
            RunStatus::BlowupDetected { .. } => {
                blowup_seen = true;
                all_bounded = false;
                let finer = sweep.grids[1..]
                    .par_iter()
                    .map(|&cells| simulate_grid(sweep, alpha, r0, cells))
                    .collect::<Result<Vec<_>>>()?;
                runs.extend(finer);
                if let Some((t_est, delta)) = blowup_delta(&runs) {
                    if delta < BLOWUP_REFINEMENT_TOL {
                        attempts.push(Attempt {
                            r0,
                            runs,
                            error: None,
                        });
                        return Ok(AlphaResult {
                            alpha,
                            verdict: Verdict::Blowup {
                                t_est,
                                refinement_delta: delta,
                                r0,
                            },
                            attempts,
                        });
                    }
                }
            }
            RunStatus::CompletedHorizon => {
                sup_max = sup_max.max(runs[0].sup_u_max);
                if !runs[0].tail_nonincreasing {
                    let fine = simulate_grid(sweep, alpha, r0, sweep.grids[1])?;
                    let stable = matches!(fine.status, RunStatus::CompletedHorizon)
                        && rel_change(runs[0].sup_u_max, fine.sup_u_max) < BOUNDED_REFINEMENT_TOL;
                    runs.push(fine);
                    all_bounded &= stable;
                }
            }
            RunStatus::StepFailure { .. } => all_bounded = false,
        }
        attempts.push(Attempt {
            r0,
            runs,
            error: None,
        });
    }
    let verdict = if all_bounded && !attempts.is_empty() {
        Verdict::Bounded { sup_u_max: sup_max }
    } else if blowup_seen {
        Verdict::Inconclusive {
            reason: format!(
                "blow-up seen but t_est changed by >= {}% under refinement",
                BLOWUP_REFINEMENT_TOL * 100.0
            ),
        }
    } else {
        Verdict::Inconclusive {
            reason: "no blow-up, and boundedness not established on every candidate".into(),
        }
    };
    Ok(AlphaResult {
        alpha,
        verdict,
        attempts,
    })
}

/// Evaluates the sweep. List mode classifies every `α` in parallel;
/// bisection keeps `[lo, hi]` with blow-up at `lo` and boundedness at `hi`.
pub fn run_sweep(sweep: &SweepConfig) -> Result<SweepReport> {
    sweep.validate()?;
    let hash = config_hash(sweep)?;
    let (mut results, bracket, note) = match &sweep.alphas {
        AlphaSelection::List { values } => {
            let results: Vec<AlphaResult> = values
                .par_iter()
                .map(|&a| classify_alpha(sweep, a))
                .collect::<Result<_>>()?;
            (results, None, None)
        }
        AlphaSelection::Bisection { lo, hi, tol } => bisect(sweep, *lo, *hi, *tol)?,
    };
    results.sort_by(|a, b| a.alpha.total_cmp(&b.alpha));
    Ok(SweepReport {
        version: VERSION.into(),
        config_hash: hash,
        results,
        bracket,
        note,
    })
}

type BisectionOutput = (Vec<AlphaResult>, Option<(f64, f64)>, Option<String>);

fn bisect(sweep: &SweepConfig, lo: f64, hi: f64, tol: f64) -> Result<BisectionOutput> {
    let (r_lo, r_hi) = rayon::join(|| classify_alpha(sweep, lo), || classify_alpha(sweep, hi));
    let (r_lo, r_hi) = (r_lo?, r_hi?);
    let ends_ok = r_lo.verdict.is_blowup() && r_hi.verdict.is_bounded();
    let both_inconclusive = matches!(r_lo.verdict, Verdict::Inconclusive { .. })
        && matches!(r_hi.verdict, Verdict::Inconclusive { .. });
    let mut results = vec![r_lo, r_hi];
    if both_inconclusive {
        return Err(Error::Config(format!(
            "bisection aborted: both endpoints alpha={lo} and alpha={hi} are inconclusive"
        )));
    }
    if !ends_ok {
        let note = format!(
            "endpoints do not bracket a transition (lo: {:?}, hi: {:?})",
            results[0].verdict, results[1].verdict
        );
        return Ok((results, None, Some(note)));
    }
    let (mut a, mut b) = (lo, hi);
    let mut note = None;
    while b - a > tol * (1.0 + 1e-9) {
        let mid = 0.5 * (a + b);
        let r = classify_alpha(sweep, mid)?;
        let v = r.verdict.clone();
        results.push(r);
        match v {
            Verdict::Blowup { .. } => a = mid,
            Verdict::Bounded { .. } => b = mid,
            Verdict::Inconclusive { .. } => {
                let (q1, q3) = (0.5 * (a + mid), 0.5 * (mid + b));
                let (r1, r3) =
                    rayon::join(|| classify_alpha(sweep, q1), || classify_alpha(sweep, q3));
                let (r1, r3) = (r1?, r3?);
                let mut moved = false;
                if r1.verdict.is_blowup() {
                    a = q1;
                    moved = true;
                }
                if r3.verdict.is_bounded() {
                    b = q3;
                    moved = true;
                }
                results.push(r1);
                results.push(r3);
                if !moved {
                    note = Some(format!(
                        "stopped at width {:.4}: inconclusive verdicts inside [{a}, {b}]",
                        b - a
                    ));
                    break;
                }
            }
        }
    }
    Ok((results, Some((a, b)), note))
}

/// Writes `report.json` and a manifest for a sweep.
pub fn write_sweep(sweep: &SweepConfig, report: &SweepReport, dir: &Path) -> Result<Manifest> {
    let mut files = Vec::new();
    let text = serde_json::to_string_pretty(report).map_err(|e| Error::Serde(e.to_string()))?;
    write_file(dir, "report.json", &(text + "\n"), &mut files)?;
    let manifest = Manifest {
        version: VERSION.into(),
        config_hash: report.config_hash.clone(),
        config: to_json(sweep)?,
        files,
        verdicts: to_json(
            &report
                .results
                .iter()
                .map(|r| (r.alpha, &r.verdict))
                .collect::<Vec<_>>(),
        )?,
    };
    write_manifest(dir, &manifest)?;
    Ok(manifest)
}
