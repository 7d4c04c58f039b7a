//! Experiment orchestration: run configuration, single runs with attached
//! diagnostics, α-sweeps with a refinement study per verdict, bisection for
//! the empirical critical exponent, and persistence of results.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::diagnostics::{
    check_lemma4, check_lemma6, fit_phi_growth, phi, phi_psi_csv, psi, records_json, CheckRecord,
    GrowthFit, MomentConfig,
};
use crate::error::{Error, Result};
use crate::initdata::{check_i1, make_profile, Check, InitialProfile, ProfileKind};
use crate::model::{gamma_window, LimiterSpec, Params, TabulatedLimiter};
use crate::solver_w::{integrate_observed, RunOutcome, RunStatus, SolverControls};
use crate::transform::{accumulate, density_from_w, MassGrid, WState};

pub mod suites;
pub mod sweep;

pub use sweep::{
    run_sweep, write_sweep, AlphaSelection, Horizon, SweepConfig, SweepReport, Verdict,
};

/// Version string recorded in every manifest.
pub const VERSION: &str = concat!("v", env!("CARGO_PKG_VERSION"));

/// Environment variable naming the default output root.
pub const OUTPUT_ENV: &str = "FLUXLIM_OUT";

/// Fraction of the nodes that automatic grading places inside the initial
/// concentration radius.
pub const AUTO_GRADING_INNER_FRACTION: f64 = 0.15;

fn one() -> f64 {
    1.0
}

/// Tabulated limiter with its power-law envelope.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CustomLimiterConfig {
    pub kappa_lower: f64,
    pub kappa_upper: f64,
    pub xi: Vec<f64>,
    pub f: Vec<f64>,
    pub df: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub n: u32,
    #[serde(default = "one")]
    pub radius: f64,
    #[serde(default = "one")]
    pub mu: f64,
    /// Limiter exponent; sweeps override it.
    #[serde(default)]
    pub alpha: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub limiter: Option<CustomLimiterConfig>,
}

impl ModelConfig {
    pub fn params(&self) -> Result<Params> {
        let limiter = match &self.limiter {
            None => LimiterSpec::prototype(self.alpha)?,
            Some(c) => {
                let table = TabulatedLimiter::new(c.xi.clone(), c.f.clone(), c.df.clone())?;
                LimiterSpec::custom(self.alpha, c.kappa_lower, c.kappa_upper, table)?
            }
        };
        Params::new(self.n, self.radius, self.mu, limiter)
    }

    fn with_alpha(&self, alpha: f64) -> Self {
        Self {
            alpha,
            ..self.clone()
        }
    }
}

fn default_cells() -> usize {
    1024
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    #[serde(default = "default_cells")]
    pub cells: usize,
    /// Grading exponent `p` of `s_j = Rⁿ(j/N)^p`; chosen from the profile if absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grading: Option<f64>,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            cells: default_cells(),
            grading: None,
        }
    }
}

/// Concentration radius of a profile, if it has one.
fn concentration_radius(profile: &InitialProfile) -> Option<f64> {
    match profile.kind {
        ProfileKind::Indicator { r0, .. } | ProfileKind::SmoothBump { r0, .. } => Some(r0),
        _ => None,
    }
}

/// Grading exponent that puts a fixed fraction of the nodes inside the
/// concentration radius `r0`, and never less than 2.
pub fn auto_grading(profile: &InitialProfile, params: &Params) -> f64 {
    match concentration_radius(profile) {
        Some(r0) if r0 > 0.0 && r0 < params.radius => {
            let p = params.dim() * (r0 / params.radius).ln() / AUTO_GRADING_INNER_FRACTION.ln();
            p.max(2.0)
        }
        _ => 2.0,
    }
}

fn default_s0_fraction() -> f64 {
    1e-3
}

/// Choice of `γ` and `s0` for the moment functional.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MomentSettings {
    /// Defaults to the midpoint of the admissible window.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s0: Option<f64>,
    /// Default `s0` as a fraction of `r0ⁿ` (or `Rⁿ` without a concentration radius).
    #[serde(default = "default_s0_fraction")]
    pub s0_fraction: f64,
}

impl Default for MomentSettings {
    fn default() -> Self {
        Self {
            gamma: None,
            s0: None,
            s0_fraction: default_s0_fraction(),
        }
    }
}

impl MomentSettings {
    /// `None` when no admissible `γ` exists.
    pub fn resolve(
        &self,
        params: &Params,
        profile: &InitialProfile,
    ) -> Result<Option<MomentConfig>> {
        let gamma = match self.gamma {
            Some(g) => g,
            None => {
                if params.n < 2 {
                    return Ok(None);
                }
                match gamma_window(params.n, params.limiter.alpha)?.midpoint() {
                    Some(g) => g,
                    None => return Ok(None),
                }
            }
        };
        let s0 = match self.s0 {
            Some(s) => s,
            None => {
                let scale = concentration_radius(profile).unwrap_or(params.radius);
                self.s0_fraction * scale.powi(params.n as i32)
            }
        };
        MomentConfig::new(gamma, s0, params).map(Some)
    }
}

fn default_label() -> String {
    "run".into()
}

/// Everything needed to reproduce one integration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_label")]
    pub label: String,
    pub model: ModelConfig,
    #[serde(default)]
    pub grid: GridConfig,
    pub profile: InitialProfile,
    #[serde(default)]
    pub controls: SolverControls,
    #[serde(default)]
    pub moments: MomentSettings,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Serde(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&read(path)?)
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// SHA-256 of the canonical JSON form of a configuration.
pub fn config_hash<T: Serialize>(config: &T) -> Result<String> {
    let json = serde_json::to_vec(config).map_err(|e| Error::Serde(e.to_string()))?;
    Ok(hex::encode(Sha256::digest(&json)))
}

/// Indicator data of radius `r0` in the unit ball with `μ = 1`, the prototype
/// limiter and automatic grading.
pub fn indicator_run(n: u32, alpha: f64, r0: f64, cells: usize, t_end: f64) -> RunConfig {
    RunConfig {
        label: format!("indicator-n{n}-a{alpha}-r{r0}-N{cells}"),
        model: ModelConfig {
            n,
            radius: 1.0,
            mu: 1.0,
            alpha,
            limiter: None,
        },
        grid: GridConfig {
            cells,
            grading: None,
        },
        profile: InitialProfile::indicator(r0),
        controls: SolverControls {
            t_end,
            ..SolverControls::default()
        },
        moments: MomentSettings::default(),
    }
}

/// A finished run with its diagnostics.
#[derive(Debug, Clone)]
pub struct RunBundle {
    pub config: RunConfig,
    pub params: Params,
    pub grid: MassGrid,
    pub u0: Vec<f64>,
    pub outcome: RunOutcome,
    pub i1: Check,
    pub moments: Option<MomentConfig>,
    pub lemma4: Vec<CheckRecord>,
    pub lemma6: Vec<CheckRecord>,
    pub growth: Option<GrowthFit>,
}

impl RunBundle {
    pub fn t_est(&self) -> Option<f64> {
        match self.outcome.status {
            RunStatus::BlowupDetected { t_est, .. } => Some(t_est),
            _ => None,
        }
    }
}

/// Grid, initial data and raw solver output of one configuration.
pub struct Simulation {
    pub params: Params,
    pub grid: MassGrid,
    pub u0: Vec<f64>,
    pub outcome: RunOutcome,
}

/// Integrates a configuration without any diagnostics.
pub fn simulate(config: &RunConfig) -> Result<Simulation> {
    let (params, grid, u0, w0) = setup(config)?;
    let outcome = integrate_observed(&w0, &params, &grid, &config.controls, |_| (None, None))?;
    Ok(Simulation {
        params,
        grid,
        u0,
        outcome,
    })
}

fn setup(config: &RunConfig) -> Result<(Params, MassGrid, Vec<f64>, WState)> {
    let params = config.model.params()?;
    let grading = match config.grid.grading {
        Some(p) => p,
        None => auto_grading(&config.profile, &params),
    };
    let grid = MassGrid::graded(&params, config.grid.cells, grading)?;
    let u0 = make_profile(&config.profile, &params, &grid)?;
    let w0 = accumulate(&u0, &grid, &params)?;
    Ok((params, grid, u0, w0))
}

/// Integrates one configuration and evaluates the diagnostics that apply:
/// `φ`/`ψ` series and the inequality checks need the data to satisfy the
/// mean-dominance condition and an admissible `γ`.
pub fn run_single(config: &RunConfig) -> Result<RunBundle> {
    let (params, grid, u0, w0) = setup(config)?;
    let i1 = check_i1(&u0, &params, &grid)?;
    let moments = if i1.holds {
        config.moments.resolve(&params, &config.profile)?
    } else {
        None
    };

    let outcome = match &moments {
        Some(cfg) => integrate_observed(&w0, &params, &grid, &config.controls, |w| {
            (
                phi(w, cfg, &params, &grid).ok(),
                psi(w, cfg, &params, &grid).ok(),
            )
        })?,
        None => integrate_observed(&w0, &params, &grid, &config.controls, |_| (None, None))?,
    };

    let mut lemma4 = Vec::new();
    let mut lemma6 = Vec::new();
    let mut growth = None;
    if let Some(cfg) = &moments {
        if outcome.snapshots.len() >= 3 {
            lemma4 = check_lemma4(&outcome, cfg, &params, &grid)?;
        }
        let nf = params.dim();
        let lemma6_applies = params.limiter.alpha < nf / (2.0 * (nf - 1.0))
            && cfg.gamma > (2.0 - 2.0 / nf) * params.limiter.alpha;
        if lemma6_applies {
            lemma6 = outcome
                .snapshots
                .iter()
                .map(|w| check_lemma6(w, cfg, &params, &grid))
                .collect::<Result<_>>()?;
        }
        if outcome.status.is_blowup() {
            growth = Some(fit_phi_growth(&outcome));
        }
    }
    Ok(RunBundle {
        config: config.clone(),
        params,
        grid,
        u0,
        outcome,
        i1,
        moments,
        lemma4,
        lemma6,
        growth,
    })
}

/// `s,w,z,u` rows of one snapshot.
pub fn snapshot_csv(w: &WState, grid: &MassGrid, params: &Params) -> Result<String> {
    let z = w.z(grid, params);
    let u = density_from_w(w, grid, params)?;
    let mut out = String::from("s,w,z,u\n");
    for j in 0..grid.nodes() {
        out.push_str(&format!(
            "{:e},{:e},{:e},{:e}\n",
            grid.s()[j],
            w.w[j],
            z.z[j],
            u[j]
        ));
    }
    Ok(out)
}

/// `t,sup_u,mass,min_z,dt,phi,psi` rows.
pub fn series_csv(outcome: &RunOutcome) -> String {
    let mut out = String::from("t,sup_u,mass,min_z,dt,phi,psi\n");
    let opt = |v: Option<f64>| v.map_or(String::new(), |x| format!("{x:e}"));
    for r in &outcome.series {
        out.push_str(&format!(
            "{:e},{:e},{:e},{:e},{:e},{},{}\n",
            r.t,
            r.sup_u,
            r.mass,
            r.min_z,
            r.dt,
            opt(r.phi),
            opt(r.psi)
        ));
    }
    out
}

/// Provenance and file index written next to every result set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: String,
    pub config_hash: String,
    pub config: serde_json::Value,
    pub files: Vec<String>,
    pub verdicts: serde_json::Value,
}

fn write_file(dir: &Path, name: &str, contents: &str, index: &mut Vec<String>) -> Result<()> {
    let path = dir.join(name);
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|source| Error::Io {
            path: parent.to_path_buf(),
            source,
        })?;
    }
    fs::write(&path, contents).map_err(|source| Error::Io { path, source })?;
    index.push(name.to_string());
    Ok(())
}

fn to_json<T: Serialize>(v: &T) -> Result<serde_json::Value> {
    serde_json::to_value(v).map_err(|e| Error::Serde(e.to_string()))
}

fn write_manifest(dir: &Path, manifest: &Manifest) -> Result<()> {
    let text = serde_json::to_string_pretty(manifest).map_err(|e| Error::Serde(e.to_string()))?;
    let path = dir.join("manifest.json");
    fs::write(&path, text + "\n").map_err(|source| Error::Io { path, source })
}

/// Summary verdicts of a single run, as recorded in its manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunVerdicts {
    pub status: RunStatus,
    pub i1_holds: bool,
    pub moments: Option<MomentConfig>,
    pub lemma4_pass: bool,
    pub lemma6_pass: bool,
    pub growth: Option<GrowthFit>,
}

impl RunBundle {
    pub fn verdicts(&self) -> RunVerdicts {
        RunVerdicts {
            status: self.outcome.status.clone(),
            i1_holds: self.i1.holds,
            moments: self.moments,
            lemma4_pass: self.lemma4.iter().all(CheckRecord::passes),
            lemma6_pass: self.lemma6.iter().all(CheckRecord::passes),
            growth: self.growth.clone(),
        }
    }
}

/// Writes snapshots, series, diagnostics and the manifest under `dir`.
pub fn write_run(bundle: &RunBundle, dir: &Path) -> Result<Manifest> {
    let mut files = Vec::new();
    let (params, grid) = (&bundle.params, &bundle.grid);
    for (i, snap) in bundle.outcome.snapshots.iter().enumerate() {
        let name = format!("snapshots/snap_{i:04}.csv");
        write_file(dir, &name, &snapshot_csv(snap, grid, params)?, &mut files)?;
    }
    write_file(dir, "series.csv", &series_csv(&bundle.outcome), &mut files)?;
    if bundle.moments.is_some() {
        write_file(
            dir,
            "phi_psi.csv",
            &phi_psi_csv(&bundle.outcome.series),
            &mut files,
        )?;
        write_file(
            dir,
            "lemma4.json",
            &records_json(&bundle.lemma4)?,
            &mut files,
        )?;
        write_file(
            dir,
            "lemma6.json",
            &records_json(&bundle.lemma6)?,
            &mut files,
        )?;
    }
    let manifest = Manifest {
        version: VERSION.into(),
        config_hash: config_hash(&bundle.config)?,
        config: to_json(&bundle.config)?,
        files,
        verdicts: to_json(&bundle.verdicts())?,
    };
    write_manifest(dir, &manifest)?;
    Ok(manifest)
}

/// Output root: `FLUXLIM_OUT` if set, else `./fluxlim-out`.
pub fn output_root() -> PathBuf {
    std::env::var_os(OUTPUT_ENV).map_or_else(|| PathBuf::from("fluxlim-out"), PathBuf::from)
}

#[cfg(test)]
mod tests {
    use super::*;

    const RUN: &str = r#"
        label = "uniform"
        [model]
        n = 3
        alpha = 0.2
        [grid]
        cells = 64
        [profile]
        kind = "uniform"
        [controls]
        t_end = 0.05
    "#;

    #[test]
    fn config_roundtrip() {
        let cfg = RunConfig::from_toml(RUN).unwrap();
        assert_eq!(cfg.model.radius, 1.0);
        assert_eq!(cfg.controls.t_end, 0.05);
        let again = RunConfig::from_toml(&cfg.to_toml().unwrap()).unwrap();
        assert_eq!(again, cfg);
        assert_eq!(config_hash(&cfg).unwrap(), config_hash(&again).unwrap());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let bad = RUN.replace("cells = 64", "cells = 64\nbogus = 1");
        assert!(RunConfig::from_toml(&bad).is_err());
    }

    #[test]
    fn uniform_run_is_stationary() {
        let cfg = RunConfig::from_toml(RUN).unwrap();
        let b = run_single(&cfg).unwrap();
        assert_eq!(b.outcome.status, RunStatus::CompletedHorizon);
        let w_ref = WState::homogeneous(&b.grid, &b.params);
        let last = b.outcome.snapshots.last().unwrap();
        for (a, r) in last.w.iter().zip(&w_ref.w) {
            assert!((a - r).abs() <= 1e-12);
        }
        assert!(b.i1.holds);
        assert!(b.lemma4.iter().all(CheckRecord::passes));
    }

    #[test]
    fn auto_grading_tracks_radius() {
        let p = Params::prototype(3, 1.0, 1.0, 0.1).unwrap();
        assert_eq!(auto_grading(&InitialProfile::indicator(0.3), &p), 2.0);
        let g = auto_grading(&InitialProfile::indicator(0.02), &p);
        assert!((g - 3.0 * 0.02f64.ln() / 0.15f64.ln()).abs() < 1e-12);
        assert_eq!(
            auto_grading(&InitialProfile::new(ProfileKind::Uniform), &p),
            2.0
        );
    }
}
