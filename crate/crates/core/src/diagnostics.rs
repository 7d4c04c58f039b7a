//! Moment functional `φ`, cross-diffusive functional `ψ`, numerical checks of
//! the differential inequalities they satisfy, and growth-rate fitting.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::model::Params;
use crate::quadrature::{gauss_legendre, moments, weighted_linear};
use crate::solver_w::{RunOutcome, RunStatus, SeriesRow};
use crate::transform::{centered_derivative, density_from_w, MassGrid, WState, ZProfile};

/// Relative slack allowed for inequalities that hold exactly in the continuum.
pub const CHECK_REL_TOL: f64 = 1e-3;

/// Parameters of the moment functional.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentConfig {
    pub gamma: f64,
    pub s0: f64,
}

impl MomentConfig {
    pub fn new(gamma: f64, s0: f64, params: &Params) -> Result<Self> {
        let cfg = Self { gamma, s0 };
        cfg.validate(params)?;
        Ok(cfg)
    }

    pub fn validate(&self, params: &Params) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return domain(format!("gamma must lie in (0,1), got {}", self.gamma));
        }
        if !(self.s0 > 0.0 && self.s0 <= params.s_max()) {
            return domain(format!(
                "s0 must lie in (0, R^n = {}], got {}",
                params.s_max(),
                self.s0
            ));
        }
        Ok(())
    }
}

/// One evaluated inequality `lhs ≥ rhs`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CheckRecord {
    pub t: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub margin: f64,
    pub tol: f64,
}

impl CheckRecord {
    fn new(t: f64, lhs: f64, rhs: f64, extra_scale: f64) -> Self {
        Self::with_floor(t, lhs, rhs, extra_scale, 0.0)
    }

    /// As [`CheckRecord::new`], with the tolerance never below `floor`.
    fn with_floor(t: f64, lhs: f64, rhs: f64, extra_scale: f64, floor: f64) -> Self {
        let tol = (CHECK_REL_TOL * lhs.abs().max(rhs.abs()).max(extra_scale.abs())).max(floor);
        Self {
            t,
            lhs,
            rhs,
            margin: lhs - rhs,
            tol,
        }
    }

    pub fn passes(&self) -> bool {
        self.margin >= -self.tol
    }
}

fn prepare<'a>(z: &'a ZProfile, grid: &MassGrid, cfg: &MomentConfig) -> Result<&'a [f64]> {
    if z.z.len() != grid.nodes() {
        return domain(format!(
            "profile has {} values, grid has {} nodes",
            z.z.len(),
            grid.nodes()
        ));
    }
    if !(cfg.s0 > 0.0 && cfg.s0 <= grid.s_max()) {
        return domain(format!("s0 = {} lies beyond the grid", cfg.s0));
    }
    if !(cfg.gamma > 0.0 && cfg.gamma < 1.0) {
        return domain(format!("gamma must lie in (0,1), got {}", cfg.gamma));
    }
    Ok(&z.z)
}

/// `φ = ∫_0^{s0} s^{-γ}(s0-s) z ds` for a shifted profile.
pub fn phi_of(z: &ZProfile, grid: &MassGrid, cfg: &MomentConfig) -> Result<f64> {
    let z = prepare(z, grid, cfg)?;
    Ok(weighted_linear(
        grid.s(),
        z,
        cfg.s0,
        -cfg.gamma,
        cfg.s0,
        -1.0,
    ))
}

pub fn phi(w: &WState, cfg: &MomentConfig, params: &Params, grid: &MassGrid) -> Result<f64> {
    phi_of(&w.z(grid, params), grid, cfg)
}

/// `ψ = nκ ∫_0^{s0} s^{-γ}(s0-s) z (1+s^{2/n-2}z²)^{-α} w_s ds`, with the
/// nodal integrand interpolated linearly.
pub fn psi(w: &WState, cfg: &MomentConfig, params: &Params, grid: &MassGrid) -> Result<f64> {
    let zp = w.z(grid, params);
    let z = prepare(&zp, grid, cfg)?;
    let n = params.dim();
    let alpha = params.limiter.alpha;
    let u = density_from_w(w, grid, params)?;
    let s = grid.s();
    let g: Vec<f64> = (0..s.len())
        .map(|j| {
            if z[j] == 0.0 {
                return 0.0;
            }
            let xi = s[j].powf(2.0 / n - 2.0) * z[j] * z[j];
            z[j] * (1.0 + xi).powf(-alpha) * u[j] / n
        })
        .collect();
    let kappa = params.limiter.kappa_lower;
    Ok(n * kappa * weighted_linear(s, &g, cfg.s0, -cfg.gamma, cfg.s0, -1.0))
}

/// The three summands on the right of the lower bound for `φ'`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Lemma4Terms {
    pub curvature: f64,
    pub boundary_layer: f64,
    pub psi: f64,
}

impl Lemma4Terms {
    pub fn total(&self) -> f64 {
        self.curvature + self.boundary_layer + self.psi
    }
}

pub fn lemma4_terms(
    w: &WState,
    cfg: &MomentConfig,
    params: &Params,
    grid: &MassGrid,
) -> Result<Lemma4Terms> {
    let zp = w.z(grid, params);
    let z = prepare(&zp, grid, cfg)?;
    let n = params.dim();
    let g = cfg.gamma;
    let s = grid.s();
    let a = 2.0 - 2.0 / n - g;
    let i1 = weighted_linear(s, z, cfg.s0, -2.0 / n - g, cfg.s0, -1.0);
    let i2 = weighted_linear(s, z, cfg.s0, 1.0 - 2.0 / n - g, 1.0, 0.0);
    Ok(Lemma4Terms {
        curvature: -n * n * a * (g - 1.0 + 2.0 / n) * i1,
        boundary_layer: -2.0 * n * n * a * i2,
        psi: psi(w, cfg, params, grid)?,
    })
}

/// Checks `φ' ≥ (curvature) + (boundary layer) + ψ` at every interior
/// snapshot, with `φ'` from centered differences in time.
pub fn check_lemma4(
    run: &RunOutcome,
    cfg: &MomentConfig,
    params: &Params,
    grid: &MassGrid,
) -> Result<Vec<CheckRecord>> {
    let mut snaps: Vec<&WState> = Vec::with_capacity(run.snapshots.len());
    for st in &run.snapshots {
        if snaps.last().is_none_or(|prev| st.t > prev.t) {
            snaps.push(st);
        }
    }
    if snaps.len() < 3 {
        return domain(format!(
            "need at least 3 distinct snapshots, got {}",
            snaps.len()
        ));
    }
    let phis = snaps
        .iter()
        .map(|st| phi(st, cfg, params, grid))
        .collect::<Result<Vec<_>>>()?;
    let unit = roundoff_scales(cfg, params, grid);
    let mut out = Vec::with_capacity(snaps.len() - 2);
    for i in 1..snaps.len() - 1 {
        let (t0, t1, t2) = (snaps[i - 1].t, snaps[i].t, snaps[i + 1].t);
        let dphi = centered_derivative(t0, t1, t2, phis[i - 1], phis[i], phis[i + 1]);
        let terms = lemma4_terms(snaps[i], cfg, params, grid)?;
        let floor = ROUNDOFF_ULPS * f64::EPSILON * (unit.0 / (t1 - t0).min(t2 - t1) + unit.1);
        out.push(CheckRecord::with_floor(
            t1,
            dphi,
            terms.total(),
            phis[i],
            floor,
        ));
    }
    Ok(out)
}

/// Multiple of machine epsilon allowed for rounding in `z`.
const ROUNDOFF_ULPS: f64 = 64.0;

/// Magnitudes of `φ` and of the right-hand side terms for `z = (μRⁿ/n)(s/s0)`.
/// Rounding of `z` at the level `ε μRⁿ/n` moves the computed values by about
/// `ε` times these, which matters only when `z` itself nearly vanishes.
fn roundoff_scales(cfg: &MomentConfig, params: &Params, grid: &MassGrid) -> (f64, f64) {
    let n = params.dim();
    let g = cfg.gamma;
    let s = grid.s();
    let z: Vec<f64> = s.iter().map(|&x| params.w_total() * x / cfg.s0).collect();
    let phi_unit = weighted_linear(s, &z, cfg.s0, -g, cfg.s0, -1.0);
    let a = (2.0 - 2.0 / n - g).abs();
    let i1 = weighted_linear(s, &z, cfg.s0, -2.0 / n - g, cfg.s0, -1.0);
    let i2 = weighted_linear(s, &z, cfg.s0, 1.0 - 2.0 / n - g, 1.0, 0.0);
    let psi_unit = params.limiter.kappa_lower * params.mu * phi_unit;
    let terms = n * n * a * ((g - 1.0 + 2.0 / n).abs() * i1 + 2.0 * i2) + psi_unit;
    (phi_unit, terms)
}

/// Integrals entering the explicit-constant inequality for `z^{1-2α} z_s`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Lemma6Integrals {
    /// `∫ s^e (s0-s) z^{1-2α} z_s`, `e = (2-2/n)α - γ`.
    pub transport: f64,
    /// `∫ s^{e-1} (s0-s) z^{2-2α}`.
    pub weighted: f64,
    /// `∫ s^e z^{2-2α}`.
    pub plain: f64,
}

/// Evaluates the three integrals with `z` interpolated by a power law
/// `c s^k` on each cell (linear through the origin on the first cell).
/// Cells where `z` does not stay positive fall back to Gauss-Legendre on the
/// clipped linear interpolant.
pub fn lemma6_integrals(
    z: &ZProfile,
    grid: &MassGrid,
    cfg: &MomentConfig,
    alpha: f64,
) -> Result<Lemma6Integrals> {
    let z = prepare(z, grid, cfg)?;
    let n = f64::from(grid.dim());
    let e = (2.0 - 2.0 / n) * alpha - cfg.gamma;
    let q1 = 1.0 - 2.0 * alpha;
    let q2 = 2.0 - 2.0 * alpha;
    let s0 = cfg.s0;
    let s = grid.s();
    // ∫_a^b s^p (s0 - s) ds
    let tent = |a: f64, b: f64, p: f64| {
        let m = moments(a, b, p);
        (s0 - a) * m[0] - m[1]
    };
    let mut acc = Lemma6Integrals {
        transport: 0.0,
        weighted: 0.0,
        plain: 0.0,
    };
    for j in 0..s.len() - 1 {
        let a = s[j];
        if a >= s0 {
            break;
        }
        let b_full = s[j + 1];
        let b = b_full.min(s0);
        let (za, zb) = (z[j], z[j + 1]);
        let power_law = if a == 0.0 {
            // carry the second cell's exponent to the origin when it keeps
            // every integral finite, else linear through the origin
            let k = match (s.get(2), z.get(2)) {
                (Some(&s2), Some(&z2)) if zb > 0.0 && z2 > 0.0 => {
                    let k = (z2 / zb).ln() / (s2 / b_full).ln();
                    if k > 0.0 && e + k * q2 - 1.0 > -1.0 {
                        k
                    } else {
                        1.0
                    }
                }
                _ => 1.0,
            };
            (zb > 0.0).then(|| (k, zb * b_full.powf(-k)))
        } else if za > 0.0 && zb > 0.0 {
            let k = (zb / za).ln() / ((b_full - a) / a).ln_1p();
            Some((k, za * a.powf(-k)))
        } else {
            None
        };
        match power_law {
            Some((k, c)) => {
                let cq = c.powf(q2);
                acc.transport += k * cq * tent(a, b, e + k * q2 - 1.0);
                acc.weighted += cq * tent(a, b, e - 1.0 + k * q2);
                acc.plain += cq * moments(a, b, e + k * q2)[0];
            }
            None if a == 0.0 => {}
            None => {
                let slope = (zb - za) / (b_full - a);
                let zl = move |x: f64| (za + slope * (x - a)).max(0.0);
                acc.transport += gauss_legendre(a, b, |x| {
                    let v = zl(x);
                    if v == 0.0 {
                        0.0
                    } else {
                        x.powf(e) * (s0 - x) * v.powf(q1) * slope
                    }
                });
                acc.weighted +=
                    gauss_legendre(a, b, |x| x.powf(e - 1.0) * (s0 - x) * zl(x).powf(q2));
                acc.plain += gauss_legendre(a, b, |x| x.powf(e) * zl(x).powf(q2));
            }
        }
    }
    Ok(acc)
}

/// `nκ ∫ s^e(s0-s) z^{1-2α} z_s ≥ k ∫ s^{e-1}(s0-s) z^{2-2α} + k ∫ s^e z^{2-2α}`.
pub fn check_lemma6_profile(
    z: &ZProfile,
    grid: &MassGrid,
    cfg: &MomentConfig,
    params: &Params,
) -> Result<CheckRecord> {
    let n = params.n;
    let alpha = params.limiter.alpha;
    let nf = params.dim();
    if !(alpha < nf / (2.0 * (nf - 1.0))) {
        return domain(format!("need alpha < n/(2(n-1)), got {alpha}"));
    }
    let kappa = params.limiter.kappa_lower;
    let k = crate::model::lemma6_k(n, alpha, cfg.gamma, kappa)?;
    let ints = lemma6_integrals(z, grid, cfg, alpha)?;
    let lhs = nf * kappa * ints.transport;
    let rhs = k * (ints.weighted + ints.plain);
    Ok(CheckRecord::new(f64::NAN, lhs, rhs, 0.0))
}

pub fn check_lemma6(
    w: &WState,
    cfg: &MomentConfig,
    params: &Params,
    grid: &MassGrid,
) -> Result<CheckRecord> {
    let mut rec = check_lemma6_profile(&w.z(grid, params), grid, cfg, params)?;
    rec.t = w.t;
    Ok(rec)
}

/// `c₃ = (μRⁿ/(16n)) ((3/4)^{1-γ} - (1/2)^{1-γ}) / (1-γ)`.
pub fn concentration_constant(params: &Params, gamma: f64) -> Result<f64> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return domain(format!("gamma must lie in (0,1), got {gamma}"));
    }
    let e = 1.0 - gamma;
    Ok(params.w_total() / 16.0 * (0.75f64.powf(e) - 0.5f64.powf(e)) / e)
}

/// `w` at an arbitrary `s`, linear between nodes.
pub fn w_at(w: &WState, grid: &MassGrid, s: f64) -> Result<f64> {
    if !(s >= 0.0 && s <= grid.s_max()) {
        return domain(format!("s = {s} outside [0, R^n]"));
    }
    let nodes = grid.s();
    let j = grid.cell_of_s(s);
    let t = (s - nodes[j]) / (nodes[j + 1] - nodes[j]);
    Ok(w.w[j] + t * (w.w[j + 1] - w.w[j]))
}

/// Checks `φ(0) ≥ c₃ s0^{2-γ}` for data with `w0(s0/2) ≥ μRⁿ/(2n)` and
/// `s0 ≤ Rⁿ/4`; the hypotheses are verified first.
pub fn check_concentration_bound(
    w0: &WState,
    cfg: &MomentConfig,
    params: &Params,
    grid: &MassGrid,
) -> Result<CheckRecord> {
    cfg.validate(params)?;
    if cfg.s0 > 0.25 * params.s_max() {
        return domain(format!("need s0 <= R^n/4, got {}", cfg.s0));
    }
    let half = w_at(w0, grid, 0.5 * cfg.s0)?;
    if half < 0.5 * params.w_total() {
        return domain(format!(
            "data not concentrated enough: w0(s0/2) = {half:e} < {:e}",
            0.5 * params.w_total()
        ));
    }
    let c3 = concentration_constant(params, cfg.gamma)?;
    let lhs = phi(w0, cfg, params, grid)?;
    let rhs = c3 * cfg.s0.powf(2.0 - cfg.gamma);
    Ok(CheckRecord::new(w0.t, lhs, rhs, 0.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum GrowthFit {
    Fitted {
        /// Slope of `log φ'` against `log φ`.
        q: f64,
        /// Root-mean-square residual of the fit in log space.
        residual: f64,
        samples: usize,
        growth: f64,
    },
    Inconclusive {
        reason: String,
    },
}

impl GrowthFit {
    pub fn exponent(&self) -> Option<f64> {
        match self {
            GrowthFit::Fitted { q, .. } => Some(*q),
            GrowthFit::Inconclusive { .. } => None,
        }
    }
}

/// Minimum number of samples in the final decade of growth.
pub const MIN_FIT_SAMPLES: usize = 10;

/// Fits `φ' ∝ φ^q` over the final decade of growth of a sampled `φ(t)`.
pub fn fit_growth_exponent(t: &[f64], phi: &[f64]) -> GrowthFit {
    let inconclusive = |reason: String| GrowthFit::Inconclusive { reason };
    if t.len() != phi.len() {
        return inconclusive("time and value series differ in length".into());
    }
    // keep strictly increasing times
    let mut ts = Vec::with_capacity(t.len());
    let mut ps = Vec::with_capacity(t.len());
    for (&ti, &pi) in t.iter().zip(phi) {
        if ts.last().is_none_or(|&last| ti > last) && pi.is_finite() {
            ts.push(ti);
            ps.push(pi);
        }
    }
    if ts.len() < 3 {
        return inconclusive(format!("only {} samples", ts.len()));
    }
    let first = ps[0];
    let last = *ps.last().unwrap();
    let growth = last / first;
    if !(first > 0.0) || !(growth >= 10.0) {
        return inconclusive(format!("phi grew by a factor {growth:.3} < 10"));
    }
    let floor = last / 10.0;
    let mut start = ps.len() - 1;
    while start > 0 && ps[start - 1] >= floor {
        start -= 1;
    }
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for i in start.max(1)..ps.len() - 1 {
        let d = centered_derivative(ts[i - 1], ts[i], ts[i + 1], ps[i - 1], ps[i], ps[i + 1]);
        if d > 0.0 {
            xs.push(ps[i].ln());
            ys.push(d.ln());
        }
    }
    if xs.len() < MIN_FIT_SAMPLES {
        return inconclusive(format!(
            "{} usable samples in the final decade, need {MIN_FIT_SAMPLES}",
            xs.len()
        ));
    }
    let m = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / m;
    let my = ys.iter().sum::<f64>() / m;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    if !(sxx > 0.0) {
        return inconclusive("degenerate fit window".into());
    }
    let q = sxy / sxx;
    let icpt = my - q * mx;
    let ss: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - icpt - q * x).powi(2))
        .sum();
    GrowthFit::Fitted {
        q,
        residual: (ss / m).sqrt(),
        samples: xs.len(),
        growth,
    }
}

/// Growth fit on the `phi` column of a run's series.
pub fn fit_phi_growth(run: &RunOutcome) -> GrowthFit {
    if !matches!(run.status, RunStatus::BlowupDetected { .. }) {
        return GrowthFit::Inconclusive {
            reason: "run did not blow up".into(),
        };
    }
    let (t, p): (Vec<f64>, Vec<f64>) = run
        .series
        .iter()
        .filter_map(|r| r.phi.map(|p| (r.t, p)))
        .unzip();
    fit_growth_exponent(&t, &p)
}

/// `t,phi,psi` rows for the samples where `φ` was evaluated.
pub fn phi_psi_csv(series: &[SeriesRow]) -> String {
    let mut out = String::from("t,phi,psi\n");
    for r in series {
        if let Some(p) = r.phi {
            let psi = r.psi.map_or(String::new(), |v| format!("{v:e}"));
            out.push_str(&format!("{:e},{p:e},{psi}\n", r.t));
        }
    }
    out
}

pub fn records_json(records: &[CheckRecord]) -> Result<String> {
    serde_json::to_string_pretty(records).map_err(|e| crate::Error::Serde(e.to_string()))
}
