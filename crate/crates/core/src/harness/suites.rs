//! Property suites behind `fluxlim validate`. Each suite draws its samples
//! from a seeded generator, so a run is reproducible from the seed alone.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{indicator_run, run_single};
use crate::diagnostics::{check_lemma6_profile, MomentConfig};
use crate::error::{Error, Result};
use crate::initdata::{InitialProfile, ProfileKind};
use crate::model::{critical_gap, gamma_conditions, gamma_window, lemma2_bound, Params};
use crate::solver_primal::crosscheck;
use crate::solver_w::SolverControls;
use crate::transform::{MassGrid, ZProfile};

/// Ulps of slack allowed where the elementary bound holds with equality.
pub const LEMMA2_ULPS: f64 = 4.0;

/// Smallest accepted discrepancy reduction per grid doubling.
pub const CROSSCHECK_MIN_REDUCTION: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Suite {
    Lemma2,
    Window,
    Lemma4,
    Lemma6,
    /// The lemma2, lemma4 and lemma6 suites.
    Lemmas,
    Crosscheck,
    All,
}

impl Suite {
    pub fn parse(name: &str) -> Result<Self> {
        Ok(match name {
            "lemma2" => Suite::Lemma2,
            "window" => Suite::Window,
            "lemma4" => Suite::Lemma4,
            "lemma6" => Suite::Lemma6,
            "lemmas" => Suite::Lemmas,
            "crosscheck" => Suite::Crosscheck,
            "all" => Suite::All,
            other => return Err(Error::Config(format!("unknown suite {other:?}"))),
        })
    }

    fn parts(self) -> &'static [Suite] {
        match self {
            Suite::Lemmas => &[Suite::Lemma2, Suite::Lemma4, Suite::Lemma6],
            Suite::All => &[
                Suite::Lemma2,
                Suite::Window,
                Suite::Lemma4,
                Suite::Lemma6,
                Suite::Crosscheck,
            ],
            Suite::Lemma2 => &[Suite::Lemma2],
            Suite::Window => &[Suite::Window],
            Suite::Lemma4 => &[Suite::Lemma4],
            Suite::Lemma6 => &[Suite::Lemma6],
            Suite::Crosscheck => &[Suite::Crosscheck],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteResult {
    pub name: String,
    pub samples: usize,
    pub violations: usize,
    pub detail: String,
}

impl SuiteResult {
    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

pub fn run_suite(suite: Suite, seed: u64) -> Result<Vec<SuiteResult>> {
    suite
        .parts()
        .iter()
        .map(|part| match part {
            Suite::Lemma2 => Ok(lemma2_suite(100_000, seed)),
            Suite::Window => window_suite(1000, seed),
            Suite::Lemma4 => lemma4_suite(),
            Suite::Lemma6 => lemma6_suite(1000, seed),
            Suite::Crosscheck => crosscheck_suite(),
            Suite::Lemmas | Suite::All => unreachable!("composite suites are expanded"),
        })
        .collect()
}

/// Largest distance of `x` from its neighbours, in units of one ulp.
fn ulp(x: f64) -> f64 {
    let a = x.abs();
    if a == 0.0 {
        f64::MIN_POSITIVE
    } else {
        a.next_up() - a
    }
}

/// `(1+ξ)^{-α} ≥ 1 - (α₊/β)ξ^β` on random `ξ ∈ [0, 10⁶]`, `α ∈ [-2, 2]`,
/// `β ∈ (0, 1]`. A tenth of the samples sit on the equality set `ξ = 0` or
/// `α = 0`.
pub fn lemma2_suite(samples: usize, seed: u64) -> SuiteResult {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut violations = 0;
    let mut worst = f64::INFINITY;
    for i in 0..samples {
        let mut xi = if rng.random_bool(0.5) {
            rng.random_range(0.0..=1e6)
        } else {
            10f64.powf(rng.random_range(-12.0..6.0))
        };
        let mut alpha = rng.random_range(-2.0..=2.0);
        match i % 20 {
            0 => xi = 0.0,
            1 => alpha = 0.0,
            _ => {}
        }
        let beta = 1.0 - rng.random_range(0.0..1.0);
        let (lhs, rhs) = lemma2_bound(xi, alpha, beta).expect("sampled inside the domain");
        let slack = (lhs - rhs) / ulp(lhs.abs().max(rhs.abs()));
        worst = worst.min(slack);
        if slack < -LEMMA2_ULPS {
            violations += 1;
        }
    }
    SuiteResult {
        name: "lemma2".into(),
        samples,
        violations,
        detail: format!("smallest slack {worst:.3e} ulp"),
    }
}

/// For `n = 2..8` and `points` values of `α` spread over `[-1, 1]` plus the
/// critical value and its neighbours: the window is empty exactly when
/// `α ≥ α_c`, and a nonempty window's midpoint meets every condition.
pub fn window_suite(points: usize, seed: u64) -> Result<SuiteResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut samples = 0;
    let mut violations = 0;
    let mut first = None;
    for n in 2..=8u32 {
        let ac = crate::model::critical_alpha(n)?;
        let mut alphas: Vec<f64> = (0..points).map(|_| rng.random_range(-1.0..=1.0)).collect();
        alphas.extend([ac, ac.next_up(), ac.next_down(), 0.0, 0.5]);
        for alpha in alphas {
            samples += 1;
            let w = gamma_window(n, alpha)?;
            let subcritical = critical_gap(n, alpha)? > 0.0;
            let ok = if subcritical {
                // a window narrower than the double spacing has no midpoint
                !w.empty
                    && w.midpoint()
                        .is_none_or(|g| gamma_conditions(n, alpha, g).is_ok_and(|c| c.all()))
            } else {
                w.empty
            };
            if !ok {
                violations += 1;
                first.get_or_insert((n, alpha));
            }
        }
    }
    Ok(SuiteResult {
        name: "window".into(),
        samples,
        violations,
        detail: first.map_or_else(
            || "emptiness matches alpha >= critical".into(),
            |(n, a)| format!("first mismatch n={n} alpha={a:e}"),
        ),
    })
}

/// Random nondecreasing `z ≥ 0` with `z(0) = 0`: piecewise with random
/// increments, sparse jumps, or a power law.
fn random_monotone_z(rng: &mut ChaCha8Rng, grid: &MassGrid) -> ZProfile {
    let s = grid.s();
    let scale = 10f64.powf(rng.random_range(-3.0..1.0));
    let z = match rng.random_range(0..3) {
        0 => {
            let mut acc: f64 = 0.0;
            let mut z = vec![0.0];
            for _ in 1..s.len() {
                acc += rng.random_range(0.0..1.0);
                z.push(acc);
            }
            let top = acc.max(f64::MIN_POSITIVE);
            z.iter().map(|v| scale * v / top).collect()
        }
        1 => {
            let mut acc = 0.0;
            let mut z = vec![0.0];
            for _ in 1..s.len() {
                if rng.random_bool(0.05) {
                    acc += rng.random_range(0.0..1.0);
                }
                z.push(acc);
            }
            z.iter().map(|v| scale * v).collect()
        }
        _ => {
            let k = rng.random_range(0.2..3.0);
            s.iter()
                .map(|&x| scale * (x / grid.s_max()).powf(k))
                .collect()
        }
    };
    ZProfile { z }
}

/// The explicit-constant inequality on random monotone profiles, random
/// `n ∈ {2..5}`, admissible `α`, `γ` and `s0`.
pub fn lemma6_suite(trials: usize, seed: u64) -> Result<SuiteResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut violations = 0;
    let mut worst = f64::INFINITY;
    for _ in 0..trials {
        let n = rng.random_range(2..=5u32);
        let nf = f64::from(n);
        let alpha_max = (nf / (2.0 * (nf - 1.0))).min(0.5);
        let alpha = rng.random_range(0.0..alpha_max);
        let gamma_min = (2.0 - 2.0 / nf) * alpha;
        let gamma = rng.random_range(gamma_min..1.0);
        if gamma <= gamma_min {
            continue;
        }
        let params = Params::prototype(n, 1.0, 1.0, alpha)?;
        let cells = rng.random_range(64..=256);
        let grid = MassGrid::graded(&params, cells, rng.random_range(1.0..4.0))?;
        let s0 = rng.random_range(0.01..=1.0) * params.s_max();
        let cfg = MomentConfig { gamma, s0 };
        let z = random_monotone_z(&mut rng, &grid);
        let rec = check_lemma6_profile(&z, &grid, &cfg, &params)?;
        if rec.tol > 0.0 {
            worst = worst.min(rec.margin / rec.tol);
        }
        if !rec.passes() {
            violations += 1;
        }
    }
    Ok(SuiteResult {
        name: "lemma6".into(),
        samples: trials,
        violations,
        detail: format!("smallest margin/tol {worst:.3e}"),
    })
}

/// Concentration radius of the blow-up run used for the moment checks.
pub const LEMMA4_RUN_R0: f64 = 0.02;

/// The lower bound for `φ'` along a sub-critical blow-up run
/// (`n = 3`, `α = 0.1`, indicator data of radius 0.02).
pub fn lemma4_suite() -> Result<SuiteResult> {
    let bundle = run_single(&indicator_run(3, 0.1, LEMMA4_RUN_R0, 1024, 1.0))?;
    let violations = bundle.lemma4.iter().filter(|r| !r.passes()).count();
    let status = format!("{:?}", bundle.outcome.status);
    Ok(SuiteResult {
        name: "lemma4".into(),
        samples: bundle.lemma4.len(),
        violations: if bundle.lemma4.is_empty() {
            1
        } else {
            violations
        },
        detail: format!("run status {status}"),
    })
}

/// Primal and mass formulations from smooth-bump data (`n = 3`, `α = 0.45`)
/// at `t = 0.1` on 64, 128 and 256 cells.
pub fn crosscheck_suite() -> Result<SuiteResult> {
    let params = Params::prototype(3, 1.0, 1.0, 0.45)?;
    let profile = InitialProfile::new(ProfileKind::SmoothBump {
        r0: 0.3,
        sharpness: 2.0,
    });
    let report = crosscheck(
        &profile,
        &params,
        0.1,
        &[64, 128, 256],
        &SolverControls::default(),
    )?;
    let factors = report.reduction_factors();
    let violations = factors
        .iter()
        .filter(|&&f| !(f >= CROSSCHECK_MIN_REDUCTION))
        .count();
    Ok(SuiteResult {
        name: "crosscheck".into(),
        samples: factors.len(),
        violations,
        detail: format!(
            "discrepancies {:?}, reductions {:?}",
            report
                .levels
                .iter()
                .map(|l| l.discrepancy)
                .collect::<Vec<_>>(),
            factors
        ),
    })
}
