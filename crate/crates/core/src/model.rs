//! Model parameters, flux limiters and the closed-form exponent algebra of the
//! radial blow-up argument.
//!
//! Everything here is a pure function of its inputs. The exponent conditions
//! are sharp near the critical limiter exponent, so emptiness decisions use an
//! exactly-signed expression rather than comparing two rounded bounds.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};

/// Physical and model parameters of one radial problem on the ball `B_R(0)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Params {
    /// Spatial dimension.
    pub n: u32,
    /// Ball radius `R`.
    pub radius: f64,
    /// Mean density `μ`.
    pub mu: f64,
    pub limiter: LimiterSpec,
}

impl Params {
    pub fn new(n: u32, radius: f64, mu: f64, limiter: LimiterSpec) -> Result<Self> {
        if n < 1 {
            return domain(format!("dimension must be >= 1, got {n}"));
        }
        if !(radius > 0.0 && radius.is_finite()) {
            return domain(format!("radius must be positive, got {radius}"));
        }
        if !(mu > 0.0 && mu.is_finite()) {
            return domain(format!("mean density must be positive, got {mu}"));
        }
        Ok(Self {
            n,
            radius,
            mu,
            limiter,
        })
    }

    /// Prototype limiter `(1+ξ)^{-α}`.
    pub fn prototype(n: u32, radius: f64, mu: f64, alpha: f64) -> Result<Self> {
        Self::new(n, radius, mu, LimiterSpec::prototype(alpha)?)
    }

    pub fn dim(&self) -> f64 {
        f64::from(self.n)
    }

    /// Upper end `Rⁿ` of the mass coordinate.
    pub fn s_max(&self) -> f64 {
        self.radius.powi(self.n as i32)
    }

    /// Slope `μ/n` of the homogeneous profile `w = μs/n`.
    pub fn slope(&self) -> f64 {
        self.mu / self.dim()
    }

    /// Boundary value `w(Rⁿ) = μRⁿ/n`.
    pub fn w_total(&self) -> f64 {
        self.slope() * self.s_max()
    }

    /// Volume of the unit ball in `Rⁿ`.
    pub fn unit_ball_volume(&self) -> f64 {
        unit_ball_volume(self.n)
    }

    /// `|Ω| = |B_1| Rⁿ`.
    pub fn domain_volume(&self) -> f64 {
        self.unit_ball_volume() * self.s_max()
    }
}

/// `|B_1(0)|` in dimension `n`, by the recursion `V_n = 2π/n · V_{n-2}`.
pub fn unit_ball_volume(n: u32) -> f64 {
    match n {
        0 => 1.0,
        1 => 2.0,
        _ => 2.0 * std::f64::consts::PI / f64::from(n) * unit_ball_volume(n - 2),
    }
}

/// Shape of the limiter `f`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "snake_case")]
pub enum LimiterForm {
    Prototype,
    Custom(TabulatedLimiter),
}

/// A flux limiter together with the power-law envelope it is known to obey:
/// `κ_f (1+ξ)^{-α} ≤ f(ξ) ≤ K_f (1+ξ)^{-α}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimiterSpec {
    pub alpha: f64,
    pub kappa_lower: f64,
    pub kappa_upper: f64,
    pub form: LimiterForm,
}

/// Number of points of the log-spaced lattice used to validate custom limiters.
pub const SANDWICH_LATTICE_POINTS: usize = 1000;

impl LimiterSpec {
    pub fn prototype(alpha: f64) -> Result<Self> {
        if !alpha.is_finite() {
            return domain(format!("alpha must be finite, got {alpha}"));
        }
        Ok(Self {
            alpha,
            kappa_lower: 1.0,
            kappa_upper: 1.0,
            form: LimiterForm::Prototype,
        })
    }

    /// Wraps a tabulated limiter after checking the envelope on a sampled lattice.
    pub fn custom(
        alpha: f64,
        kappa_lower: f64,
        kappa_upper: f64,
        table: TabulatedLimiter,
    ) -> Result<Self> {
        if !(kappa_lower > 0.0 && kappa_lower <= kappa_upper) {
            return domain(format!(
                "need 0 < kappa_lower <= kappa_upper, got {kappa_lower}, {kappa_upper}"
            ));
        }
        let spec = Self {
            alpha,
            kappa_lower,
            kappa_upper,
            form: LimiterForm::Custom(table),
        };
        if let Some((xi, f)) = spec.sandwich_violation() {
            return domain(format!(
                "custom limiter leaves its envelope at xi={xi:e}: f={f:e}"
            ));
        }
        Ok(spec)
    }

    /// First lattice point where the envelope fails, if any.
    pub fn sandwich_violation(&self) -> Option<(f64, f64)> {
        sandwich_lattice(SANDWICH_LATTICE_POINTS)
            .into_iter()
            .find_map(|xi| {
                let env = (1.0 + xi).powf(-self.alpha);
                let f = self.value(xi);
                let slack = 1e-12 * env;
                let ok = f >= self.kappa_lower * env - slack && f <= self.kappa_upper * env + slack;
                (!ok).then_some((xi, f))
            })
    }

    /// `f(ξ)` without argument checking; `ξ` must be nonnegative.
    #[inline]
    pub fn value(&self, xi: f64) -> f64 {
        match &self.form {
            LimiterForm::Prototype => (1.0 + xi).powf(-self.alpha),
            LimiterForm::Custom(table) => table.value(xi, self.alpha),
        }
    }
}

/// `ξ = 0` followed by `points - 1` log-spaced values in `[1e-6, 1e6]`.
pub fn sandwich_lattice(points: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(points);
    out.push(0.0);
    let m = points.saturating_sub(1).max(1);
    for i in 0..points.saturating_sub(1) {
        let e = -6.0 + 12.0 * i as f64 / (m - 1).max(1) as f64;
        out.push(10f64.powf(e));
    }
    out
}

/// Limiter given by samples `(ξ_i, f_i, f'_i)`, interpolated by monotone
/// cubic Hermite pieces. Beyond the last sample the power-law tail
/// `f_last · ((1+ξ)/(1+ξ_last))^{-α}` is used.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TabulatedLimiter {
    xi: Vec<f64>,
    f: Vec<f64>,
    /// Per-interval endpoint slopes after monotonicity limiting.
    slopes: Vec<(f64, f64)>,
}

impl TabulatedLimiter {
    pub fn new(xi: Vec<f64>, f: Vec<f64>, df: Vec<f64>) -> Result<Self> {
        if xi.len() < 2 || xi.len() != f.len() || xi.len() != df.len() {
            return domain("tabulated limiter needs >= 2 samples of equal length");
        }
        if xi[0] != 0.0 {
            return domain("tabulated limiter must start at xi = 0");
        }
        if xi.windows(2).any(|p| !(p[1] > p[0])) {
            return domain("tabulated xi must be strictly increasing");
        }
        if f.iter().any(|v| !(*v > 0.0 && v.is_finite())) || df.iter().any(|d| !d.is_finite()) {
            return domain("tabulated f must be positive and finite");
        }
        let slopes = xi
            .windows(2)
            .zip(f.windows(2))
            .zip(df.windows(2))
            .map(|((x, y), d)| {
                let delta = (y[1] - y[0]) / (x[1] - x[0]);
                fritsch_carlson(delta, d[0], d[1])
            })
            .collect();
        Ok(Self { xi, f, slopes })
    }

    fn value(&self, xi: f64, alpha: f64) -> f64 {
        let last = self.xi.len() - 1;
        if xi >= self.xi[last] {
            let ratio = (1.0 + xi) / (1.0 + self.xi[last]);
            return self.f[last] * ratio.powf(-alpha);
        }
        let i = self.xi.partition_point(|&x| x <= xi).saturating_sub(1);
        let h = self.xi[i + 1] - self.xi[i];
        let t = (xi - self.xi[i]) / h;
        let (d0, d1) = self.slopes[i];
        let t2 = t * t;
        let t3 = t2 * t;
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        h00 * self.f[i] + h10 * h * d0 + h01 * self.f[i + 1] + h11 * h * d1
    }
}

fn fritsch_carlson(delta: f64, d0: f64, d1: f64) -> (f64, f64) {
    if delta == 0.0 {
        return (0.0, 0.0);
    }
    // Slopes opposing the secant would create an interior extremum.
    let mut a = (d0 / delta).max(0.0);
    let mut b = (d1 / delta).max(0.0);
    let r = a.hypot(b);
    if r > 3.0 {
        a *= 3.0 / r;
        b *= 3.0 / r;
    }
    (a * delta, b * delta)
}

/// Checked evaluation of the limiter.
pub fn eval_f(xi: f64, spec: &LimiterSpec) -> Result<f64> {
    if !(xi >= 0.0) {
        return domain(format!("limiter argument must be >= 0, got {xi}"));
    }
    Ok(spec.value(xi))
}

/// Both sides of `(1+ξ)^{-α} ≥ 1 - (α₊/β) ξ^β`.
pub fn lemma2_bound(xi: f64, alpha: f64, beta: f64) -> Result<(f64, f64)> {
    if !(xi >= 0.0) {
        return domain(format!("xi must be >= 0, got {xi}"));
    }
    if !(beta > 0.0 && beta <= 1.0) {
        return domain(format!("beta must lie in (0,1], got {beta}"));
    }
    let lhs = (1.0 + xi).powf(-alpha);
    let rhs = 1.0 - alpha.max(0.0) / beta * xi.powf(beta);
    Ok((lhs, rhs))
}

fn require_n2(n: u32) -> Result<f64> {
    if n < 2 {
        return domain(format!("exponent algebra needs n >= 2, got {n}"));
    }
    Ok(f64::from(n))
}

/// Critical limiter exponent `(n-2)/(2(n-1))`.
pub fn critical_alpha(n: u32) -> Result<f64> {
    let nf = require_n2(n)?;
    Ok((nf - 2.0) / (2.0 * (nf - 1.0)))
}

/// `2(n-1)·(α_c - α) = (n-2) - 2(n-1)α`, evaluated with a single rounding so
/// its sign is exact for every binary64 `α`.
pub fn critical_gap(n: u32, alpha: f64) -> Result<f64> {
    let nf = require_n2(n)?;
    Ok((-2.0 * (nf - 1.0)).mul_add(alpha, nf - 2.0))
}

/// `(4-4/n)α² - (6-8/n)α + 2 - 4/n`.
pub fn quadratic_q(n: u32, alpha: f64) -> Result<f64> {
    let nf = require_n2(n)?;
    Ok((4.0 - 4.0 / nf) * alpha * alpha - (6.0 - 8.0 / nf) * alpha + 2.0 - 4.0 / nf)
}

/// Open interval of admissible moment exponents `γ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GammaWindow {
    pub n: u32,
    pub alpha: f64,
    /// Rounded bounds; membership is decided exactly by [`Self::contains`].
    pub lower: f64,
    pub upper: f64,
    pub empty: bool,
}

/// Doubles scanned around a window too narrow for its rounded midpoint.
const MIDPOINT_SCAN: usize = 256;

impl GammaWindow {
    pub fn contains(&self, gamma: f64) -> bool {
        !self.empty && gamma_conditions(self.n, self.alpha, gamma).is_ok_and(|c| c.all())
    }

    /// The rounded midpoint, or for a window only a few ulps wide the middle
    /// double that passes the exact test. `None` if no double is admissible,
    /// which happens for `α` within a few ulps of the critical value.
    pub fn midpoint(&self) -> Option<f64> {
        if self.empty {
            return None;
        }
        let m = 0.5 * (self.lower + self.upper);
        if self.contains(m) {
            return Some(m);
        }
        let mut g = self.lower.min(self.upper);
        for _ in 0..16 {
            g = g.next_down();
        }
        let admissible: Vec<f64> = std::iter::successors(Some(g), |x| Some(x.next_up()))
            .take(MIDPOINT_SCAN)
            .filter(|&x| self.contains(x))
            .collect();
        admissible.get(admissible.len() / 2).copied()
    }

    pub fn width(&self) -> f64 {
        if self.empty {
            0.0
        } else {
            (self.upper - self.lower).max(0.0)
        }
    }
}

/// The four conditions on `γ` required by the blow-up argument.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GammaConditions {
    pub in_unit_interval: bool,
    pub above_drift_exponent: bool,
    pub first_moment_bound: bool,
    pub second_moment_bound: bool,
}

impl GammaConditions {
    pub fn all(&self) -> bool {
        self.in_unit_interval
            && self.above_drift_exponent
            && self.first_moment_bound
            && self.second_moment_bound
    }
}

fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

fn two_prod(a: f64, b: f64) -> [f64; 2] {
    let p = a * b;
    [p, a.mul_add(b, -p)]
}

/// Exact sign of a sum of doubles, via a nonoverlapping expansion.
fn sum_sign(terms: &[f64]) -> std::cmp::Ordering {
    let mut expansion: Vec<f64> = Vec::with_capacity(terms.len());
    for &t in terms {
        let mut q = t;
        let mut next = Vec::with_capacity(expansion.len() + 1);
        for &e in &expansion {
            let (s, err) = two_sum(q, e);
            if err != 0.0 {
                next.push(err);
            }
            q = s;
        }
        next.push(q);
        expansion = next;
    }
    let top = expansion
        .iter()
        .rev()
        .find(|v| **v != 0.0)
        .copied()
        .unwrap_or(0.0);
    top.partial_cmp(&0.0).unwrap_or(std::cmp::Ordering::Equal)
}

/// Evaluates each defining inequality at `γ` with an exact sign, after
/// multiplying through by `n`.
pub fn gamma_conditions(n: u32, alpha: f64, gamma: f64) -> Result<GammaConditions> {
    use std::cmp::Ordering::{Greater, Less};
    let nf = require_n2(n)?;
    let ng = two_prod(nf, gamma);
    let ag = two_prod(alpha, gamma);
    let [h0, h1] = two_prod(-2.0 * nf, ag[0]);
    let [l0, l1] = two_prod(-2.0 * nf, ag[1]);
    let four_n_a = two_prod(4.0 * nf, alpha);
    // nγ - (2n-2)α > 0
    let drift = two_prod(-(2.0 * nf - 2.0), alpha);
    // n(1-2α)γ - (2n - 4 - 4nα + 6α) < 0
    let six_a = two_prod(-6.0, alpha);
    // n(1-2α)γ - (2n - 4nα + 2α) < 0
    let two_a = two_prod(-2.0, alpha);
    let shared = [ng[0], ng[1], h0, h1, l0, l1, four_n_a[0], four_n_a[1]];
    let with = |extra: [f64; 3]| {
        let mut t = shared.to_vec();
        t.extend(extra);
        sum_sign(&t)
    };
    Ok(GammaConditions {
        in_unit_interval: gamma > 0.0 && gamma < 1.0,
        above_drift_exponent: sum_sign(&[ng[0], ng[1], drift[0], drift[1]]) == Greater,
        first_moment_bound: with([4.0 - 2.0 * nf, six_a[0], six_a[1]]) == Less,
        second_moment_bound: with([-2.0 * nf, two_a[0], two_a[1]]) == Less,
    })
}

/// `{γ ∈ (0,1) : γ > (2-2/n)α, (1-2α)γ < 2-4/n-4α+6α/n, (1-2α)γ < 2-4α+2α/n}`.
pub fn gamma_window(n: u32, alpha: f64) -> Result<GammaWindow> {
    let nf = require_n2(n)?;
    if !alpha.is_finite() {
        return domain(format!("alpha must be finite, got {alpha}"));
    }
    let c = 1.0 - 2.0 * alpha;
    let a13 = 2.0 - 4.0 / nf - 4.0 * alpha + 6.0 * alpha / nf;
    let a14 = 2.0 - 4.0 * alpha + 2.0 * alpha / nf;

    let mut lower = (2.0 - 2.0 / nf) * alpha;
    lower = lower.max(0.0);
    let mut upper: f64 = 1.0;
    if c > 0.0 {
        upper = upper.min(a13 / c).min(a14 / c);
    } else if c < 0.0 {
        lower = lower.max(a13 / c).max(a14 / c);
    }
    let window = |empty| GammaWindow {
        n,
        alpha,
        lower,
        upper,
        empty,
    };
    if c == 0.0 && (a13 <= 0.0 || a14 <= 0.0) {
        return Ok(window(true));
    }

    // upper13 - lower = Q/(1-2α) with Q = (4-4/n)(α_c - α)(1-α), so for
    // α < 1 the window is nonempty exactly when the critical gap is positive.
    // Within a few ulps of α_c the rounded bounds may cross; the window is
    // still nonempty and `midpoint` searches for an admissible double.
    let gap = critical_gap(n, alpha)?;
    Ok(window(gap <= 0.0))
}

/// Exponents of the superlinear differential inequality for the moment functional.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OdiExponents {
    /// Power of `s_0` multiplying `φ^{2-2α}`.
    pub a1: f64,
    /// Power of `s_0` in the absorbed remainder.
    pub lambda: f64,
}

pub fn odi_exponents(n: u32, alpha: f64, gamma: f64) -> Result<OdiExponents> {
    let nf = require_n2(n)?;
    let window = gamma_window(n, alpha)?;
    if !window.contains(gamma) {
        return domain(format!(
            "gamma={gamma} outside the admissible window for n={n}, alpha={alpha}"
        ));
    }
    let c = 1.0 - 2.0 * alpha;
    let a1 = -3.0 + 6.0 * alpha - 2.0 * alpha / nf + c * gamma;
    let lambda = (3.0 - 4.0 / nf - 6.0 * alpha + 6.0 * alpha / nf - c * gamma) / c;
    Ok(OdiExponents { a1, lambda })
}

/// `k = nκ_f/(2-2α) · min{γ - (2-2/n)α, 1}`.
pub fn lemma6_k(n: u32, alpha: f64, gamma: f64, kappa_lower: f64) -> Result<f64> {
    if n < 1 {
        return domain("dimension must be >= 1");
    }
    let nf = f64::from(n);
    let excess = gamma - (2.0 - 2.0 / nf) * alpha;
    if !(excess > 0.0) {
        return domain(format!(
            "need gamma > (2-2/n)alpha, got gamma={gamma}, alpha={alpha}"
        ));
    }
    if !(alpha < 1.0) {
        return domain(format!("need alpha < 1, got {alpha}"));
    }
    if !(kappa_lower > 0.0) {
        return domain(format!("kappa_lower must be positive, got {kappa_lower}"));
    }
    Ok(nf * kappa_lower / (2.0 - 2.0 * alpha) * excess.min(1.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * b.abs().max(1.0)
    }

    #[test]
    fn prototype_values() {
        let s = LimiterSpec::prototype(0.3).unwrap();
        assert_eq!(eval_f(0.0, &s).unwrap(), 1.0);
        let s = LimiterSpec::prototype(0.5).unwrap();
        assert_eq!(eval_f(3.0, &s).unwrap(), 0.5);
        let s = LimiterSpec::prototype(0.0).unwrap();
        assert_eq!(eval_f(1.0, &s).unwrap(), 1.0);
        assert!(eval_f(-1e-3, &s).is_err());
    }

    #[test]
    fn lemma2_examples() {
        assert_eq!(lemma2_bound(0.0, 0.4, 0.5).unwrap(), (1.0, 1.0));
        let (l, r) = lemma2_bound(7.0, -1.0, 1.0).unwrap();
        assert_eq!(r, 1.0);
        assert_eq!(l, 8.0);
        let (l, r) = lemma2_bound(4.0, 0.5, 0.5).unwrap();
        assert!(close(l, 5f64.powf(-0.5), 1e-15));
        assert_eq!(r, -1.0);
        assert!(lemma2_bound(1.0, 0.1, 0.0).is_err());
        assert!(lemma2_bound(1.0, 0.1, 1.5).is_err());
    }

    #[test]
    fn critical_values() {
        assert_eq!(critical_alpha(2).unwrap(), 0.0);
        assert_eq!(critical_alpha(3).unwrap(), 0.25);
        assert!(close(critical_alpha(4).unwrap(), 1.0 / 3.0, 1e-16));
        assert!(critical_alpha(1).is_err());
    }

    #[test]
    fn quadratic_examples() {
        assert_eq!(quadratic_q(3, 0.25).unwrap(), 0.0);
        assert!(close(quadratic_q(3, 0.0).unwrap(), 2.0 / 3.0, 1e-15));
        assert!(quadratic_q(4, 1.0).unwrap().abs() < 1e-15);
    }

    #[test]
    fn window_examples() {
        let w = gamma_window(3, 0.2).unwrap();
        assert!(!w.empty);
        assert!(close(w.lower, 0.8 / 3.0, 1e-15));
        assert!(close(w.upper, 4.0 / 9.0, 1e-15));
        assert!(gamma_window(3, 0.25).unwrap().empty);
        let w = gamma_window(3, -1.0).unwrap();
        assert_eq!(w.lower, 0.0);
        assert!(close(w.upper, 8.0 / 9.0, 1e-15));
        assert!(gamma_window(3, 0.3).unwrap().empty);
        assert!(gamma_window(2, 0.6).unwrap().empty);
        assert!(gamma_window(5, 0.5).unwrap().empty);
    }

    #[test]
    fn window_one_ulp_below_critical() {
        for n in [3, 4, 6] {
            let alpha = critical_alpha(n).unwrap().next_down();
            let w = gamma_window(n, alpha).unwrap();
            assert!(!w.empty);
            let g = w.midpoint().expect("an admissible double exists");
            assert!(gamma_conditions(n, alpha, g).unwrap().all());
            // the rounded bounds admit doubles the exact test rejects
            assert!(!w.contains(w.lower.next_down()));
        }
    }

    #[test]
    fn exact_sign_of_cancelling_sums() {
        use std::cmp::Ordering::*;
        assert_eq!(sum_sign(&[1e300, 1.0, -1e300]), Greater);
        assert_eq!(sum_sign(&[0.1, 0.2, -0.3]), Greater);
        assert_eq!(sum_sign(&[1.0, -1.0]), Equal);
        assert_eq!(sum_sign(&[1e-300, -1.0, 1.0]), Greater);
    }

    #[test]
    fn odi_examples() {
        let e = odi_exponents(3, 0.2, 0.35).unwrap();
        assert!(close(e.a1, -1.723_333_333_333_333, 1e-13));
        assert!(close(e.lambda, 1.094_444_444_444_444, 1e-13));
        let lhs = (3.0 - 2.0 / 3.0 - 0.35) - e.lambda;
        assert!(close(lhs, 2.0 * 0.8 / (3.0 * 0.6), 1e-14));
        let e = odi_exponents(3, 0.0, 0.5).unwrap();
        assert!(close(e.a1, -2.5, 1e-15));
        assert!(close(e.lambda, 7.0 / 6.0, 1e-15));
        assert!(odi_exponents(3, 0.2, 0.1).is_err());
    }

    #[test]
    fn lemma6_constant() {
        assert!(close(lemma6_k(3, 0.2, 0.35, 1.0).unwrap(), 0.15625, 1e-14));
        assert!(close(lemma6_k(2, 0.0, 0.5, 1.0).unwrap(), 0.5, 1e-15));
        assert!(lemma6_k(3, 0.2, 0.2, 1.0).is_err());
        assert!(lemma6_k(3, 1.0, 2.0, 1.0).is_err());
    }

    #[test]
    fn tabulated_limiter_sandwich() {
        let alpha = 0.3;
        let xi: Vec<f64> = (0..40)
            .map(|i| 10f64.powf(-3.0 + 0.2 * i as f64) - 1e-3)
            .collect();
        let f: Vec<f64> = xi.iter().map(|x| 1.1 * (1.0 + x).powf(-alpha)).collect();
        let df: Vec<f64> = xi
            .iter()
            .map(|x| -1.1 * alpha * (1.0 + x).powf(-alpha - 1.0))
            .collect();
        let table = TabulatedLimiter::new(xi, f, df).unwrap();
        let spec = LimiterSpec::custom(alpha, 1.0, 1.2, table.clone()).unwrap();
        for xi in sandwich_lattice(SANDWICH_LATTICE_POINTS) {
            let env = (1.0 + xi).powf(-alpha);
            let v = eval_f(xi, &spec).unwrap();
            assert!(v >= env && v <= 1.2 * env, "xi={xi} f={v}");
        }
        assert!(LimiterSpec::custom(alpha, 1.0, 1.05, table).is_err());
    }

    #[test]
    fn tabulated_limiter_rejects_bad_tables() {
        assert!(TabulatedLimiter::new(vec![0.0], vec![1.0], vec![0.0]).is_err());
        assert!(TabulatedLimiter::new(vec![0.1, 1.0], vec![1.0, 0.5], vec![0.0, 0.0]).is_err());
        assert!(TabulatedLimiter::new(vec![0.0, 0.0], vec![1.0, 0.5], vec![0.0, 0.0]).is_err());
        assert!(TabulatedLimiter::new(vec![0.0, 1.0], vec![1.0, -0.5], vec![0.0, 0.0]).is_err());
    }
}
