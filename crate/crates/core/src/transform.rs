//! Mass-coordinate grid and conversions between the radial density `u(r)`,
//! the accumulated mass `w(s) = ∫_0^{s^{1/n}} ρ^{n-1} u(ρ) dρ`, the shifted
//! profile `z = w - μs/n` and the chemical gradient `v_r`.
//!
//! The `r`-grid is always the image `r_j = s_j^{1/n}` of the `s`-grid.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::model::Params;

/// Minimum number of cells (the grid then has at least 33 nodes).
pub const MIN_CELLS: usize = 32;

/// Graded grid `s_j = Rⁿ (j/N)^p` on `[0, Rⁿ]`.
#[derive(Debug, Clone, PartialEq)]
pub struct MassGrid {
    s: Vec<f64>,
    r: Vec<f64>,
    grading: f64,
    n: u32,
}

impl MassGrid {
    pub fn graded(params: &Params, cells: usize, grading: f64) -> Result<Self> {
        if cells < MIN_CELLS {
            return domain(format!("need at least {MIN_CELLS} cells, got {cells}"));
        }
        if !(grading >= 1.0 && grading.is_finite()) {
            return domain(format!("grading exponent must be >= 1, got {grading}"));
        }
        let s_max = params.s_max();
        let inv_n = 1.0 / params.dim();
        let mut s: Vec<f64> = (0..=cells)
            .map(|j| s_max * (j as f64 / cells as f64).powf(grading))
            .collect();
        s[0] = 0.0;
        s[cells] = s_max;
        let mut r: Vec<f64> = s.iter().map(|&sj| sj.powf(inv_n)).collect();
        r[cells] = params.radius;
        if s.windows(2).any(|p| !(p[1] > p[0])) {
            return domain("grid nodes are not strictly increasing");
        }
        Ok(Self {
            s,
            r,
            grading,
            n: params.n,
        })
    }

    /// Grid that is uniform in `r` (grading exponent equal to the dimension).
    pub fn uniform_in_r(params: &Params, cells: usize) -> Result<Self> {
        Self::graded(params, cells, params.dim())
    }

    pub fn s(&self) -> &[f64] {
        &self.s
    }

    pub fn r(&self) -> &[f64] {
        &self.r
    }

    pub fn grading(&self) -> f64 {
        self.grading
    }

    pub fn dim(&self) -> u32 {
        self.n
    }

    pub fn cells(&self) -> usize {
        self.s.len() - 1
    }

    pub fn nodes(&self) -> usize {
        self.s.len()
    }

    pub fn s_max(&self) -> f64 {
        self.s[self.cells()]
    }

    /// Index `j` of the cell `[s_j, s_{j+1}]` containing `s` (clamped).
    pub fn cell_of_s(&self, s: f64) -> usize {
        self.s
            .partition_point(|&x| x <= s)
            .saturating_sub(1)
            .min(self.cells() - 1)
    }

    fn check_len(&self, len: usize, what: &str) -> Result<()> {
        if len != self.nodes() {
            return domain(format!(
                "{what} has {len} entries, grid has {} nodes",
                self.nodes()
            ));
        }
        Ok(())
    }
}

/// Accumulated-mass profile at time `t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WState {
    pub w: Vec<f64>,
    pub t: f64,
}

impl WState {
    /// Homogeneous steady state `w = μs/n`.
    pub fn homogeneous(grid: &MassGrid, params: &Params) -> Self {
        let slope = params.slope();
        let mut w: Vec<f64> = grid.s().iter().map(|&s| slope * s).collect();
        w[0] = 0.0;
        Self { w, t: 0.0 }
    }

    pub fn z(&self, grid: &MassGrid, params: &Params) -> ZProfile {
        shifted(&self.w, grid, params)
    }

    /// `min_j (w_j - μ s_j/n)`.
    pub fn min_z(&self, grid: &MassGrid, params: &Params) -> f64 {
        let slope = params.slope();
        self.w
            .iter()
            .zip(grid.s())
            .map(|(&w, &s)| w - slope * s)
            .fold(f64::INFINITY, f64::min)
    }

    /// Largest cell slope `n · max (w_{j+1}-w_j)/(s_{j+1}-s_j)`, i.e. `sup u`.
    pub fn sup_u(&self, grid: &MassGrid) -> f64 {
        let n = f64::from(grid.dim());
        cell_slopes(&self.w, grid.s()).fold(f64::NEG_INFINITY, f64::max) * n
    }

    /// Smallest cell slope of `w`.
    pub fn min_slope(&self, grid: &MassGrid) -> f64 {
        cell_slopes(&self.w, grid.s()).fold(f64::INFINITY, f64::min)
    }

    /// Checks the boundary rows and monotonicity to a relative tolerance.
    pub fn validate(&self, grid: &MassGrid, params: &Params, rel_tol: f64) -> Result<()> {
        grid.check_len(self.w.len(), "w")?;
        let total = params.w_total();
        let tol = rel_tol * total;
        if self.w[0].abs() > tol {
            return domain(format!("w(0) = {:e} is not 0", self.w[0]));
        }
        let last = self.w[grid.cells()];
        if (last - total).abs() > tol {
            return domain(format!("w(R^n) = {last:e}, expected {total:e}"));
        }
        if self.w.windows(2).any(|p| p[1] - p[0] < -tol) {
            return domain("w is not nondecreasing");
        }
        if self.w.iter().any(|v| !v.is_finite()) {
            return domain("w contains non-finite values");
        }
        Ok(())
    }
}

fn cell_slopes<'a>(w: &'a [f64], s: &'a [f64]) -> impl Iterator<Item = f64> + 'a {
    w.windows(2)
        .zip(s.windows(2))
        .map(|(w, s)| (w[1] - w[0]) / (s[1] - s[0]))
}

/// Shifted profile `z = w - μs/n`; its endpoint values are exactly zero.
#[derive(Debug, Clone, PartialEq)]
pub struct ZProfile {
    pub z: Vec<f64>,
}

fn shifted(w: &[f64], grid: &MassGrid, params: &Params) -> ZProfile {
    let slope = params.slope();
    let mut z: Vec<f64> = w
        .iter()
        .zip(grid.s())
        .map(|(&w, &s)| w - slope * s)
        .collect();
    let last = z.len() - 1;
    z[0] = 0.0;
    z[last] = 0.0;
    ZProfile { z }
}

/// `∫_{a}^{b} ρ^{n-1} ℓ(ρ) dρ` for the linear `ℓ` with `ℓ(a)=ua`, `ℓ(b)=ub`,
/// written in terms of `s = ρⁿ` so that constant `ℓ` gives `u(s_b-s_a)/n` exactly.
pub(crate) fn cell_mass(n: f64, ra: f64, rb: f64, sa: f64, sb: f64, ua: f64, ub: f64) -> f64 {
    let h = rb - ra;
    let m0 = (sb - sa) / n;
    // ∫ ρ^{n-1}(ρ - a) dρ = (b^{n+1}-a^{n+1})/(n+1) - a(sb-sa)/n
    let m1 = (sb * rb - sa * ra) / (n + 1.0) - ra * m0;
    let right = m1 / h;
    let left = m0 - right;
    ua * left + ub * right
}

/// Integrates `ρ^{n-1} u(ρ)` exactly for the piecewise-linear interpolant of
/// `u` in `ρ`, node by node.
pub fn accumulate(u: &[f64], grid: &MassGrid, params: &Params) -> Result<WState> {
    grid.check_len(u.len(), "density")?;
    if let Some(bad) = u.iter().find(|v| !(**v >= 0.0)) {
        return domain(format!("density must be nonnegative, found {bad}"));
    }
    Ok(WState {
        w: accumulate_unchecked(u, grid, params.dim()),
        t: 0.0,
    })
}

pub(crate) fn accumulate_unchecked(u: &[f64], grid: &MassGrid, n: f64) -> Vec<f64> {
    let (s, r) = (grid.s(), grid.r());
    let mut w = Vec::with_capacity(u.len());
    let mut acc = 0.0;
    w.push(0.0);
    for j in 0..grid.cells() {
        acc += cell_mass(n, r[j], r[j + 1], s[j], s[j + 1], u[j], u[j + 1]);
        w.push(acc);
    }
    w
}

/// `w(ρⁿ)` at an arbitrary radius, integrating the partial cell exactly.
pub fn accumulate_at(u: &[f64], grid: &MassGrid, params: &Params, radius: f64) -> Result<f64> {
    grid.check_len(u.len(), "density")?;
    if !(radius >= 0.0 && radius <= params.radius) {
        return domain(format!("radius {radius} outside [0, R]"));
    }
    let n = params.dim();
    let w = accumulate_unchecked(u, grid, n);
    let s_target = radius.powi(params.n as i32);
    let j = grid.cell_of_s(s_target);
    let (r, s) = (grid.r(), grid.s());
    if radius <= r[j] {
        return Ok(w[j]);
    }
    let theta = (radius - r[j]) / (r[j + 1] - r[j]);
    let u_end = u[j] + theta * (u[j + 1] - u[j]);
    Ok(w[j] + cell_mass(n, r[j], radius, s[j], s_target, u[j], u_end))
}

/// Mean `(1/|Ω|) ∫_Ω u` under the same piecewise-linear quadrature.
pub fn mean_density(u: &[f64], grid: &MassGrid, params: &Params) -> Result<f64> {
    let w = accumulate(u, grid, params)?;
    Ok(params.dim() * w.w[grid.cells()] / params.s_max())
}

/// Density `u = n w_s` at the `r`-nodes, by the three-point nonuniform
/// derivative in `s` (one-sided at the ends).
pub fn density_from_w(state: &WState, grid: &MassGrid, params: &Params) -> Result<Vec<f64>> {
    grid.check_len(state.w.len(), "w")?;
    let n = params.dim();
    let (w, s) = (&state.w, grid.s());
    let last = grid.cells();
    let mut u = vec![0.0; w.len()];
    for j in 1..last {
        u[j] = n * centered_derivative(s[j - 1], s[j], s[j + 1], w[j - 1], w[j], w[j + 1]);
    }
    u[0] = n * one_sided_derivative(s[0], s[1], s[2], w[0], w[1], w[2]);
    u[last] = n * one_sided_derivative(
        s[last],
        s[last - 1],
        s[last - 2],
        w[last],
        w[last - 1],
        w[last - 2],
    );
    Ok(u)
}

/// Second-order derivative at `x1` from nodes `x0 < x1 < x2`. A flat
/// neighbourhood returns exactly zero.
#[inline]
pub(crate) fn centered_derivative(x0: f64, x1: f64, x2: f64, y0: f64, y1: f64, y2: f64) -> f64 {
    let hm = x1 - x0;
    let hp = x2 - x1;
    let dm = (y1 - y0) / hm;
    let dp = (y2 - y1) / hp;
    (hp * dm + hm * dp) / (hm + hp)
}

/// Second-order one-sided derivative at `x0` from `x0, x1, x2` (either side).
#[inline]
fn one_sided_derivative(x0: f64, x1: f64, x2: f64, y0: f64, y1: f64, y2: f64) -> f64 {
    let h1 = x1 - x0;
    let h2 = x2 - x0;
    let d1 = (y1 - y0) / h1;
    let d2 = (y2 - y0) / h2;
    (h2 * d1 - h1 * d2) / (h2 - h1)
}

/// Limiter argument `s^{2/n-2} z²`, which equals `v_r²` at `r = s^{1/n}`.
#[inline]
pub fn limiter_argument(s: f64, z: f64, n: f64) -> f64 {
    s.powf(2.0 / n - 2.0) * z * z
}

/// `v_r(r_j) = -r_j^{1-n} z(r_jⁿ)` at nodes `1..=N`; the removable
/// singularity at `r = 0` is excluded.
pub fn gradient_v(state: &WState, grid: &MassGrid, params: &Params) -> Result<Vec<f64>> {
    grid.check_len(state.w.len(), "w")?;
    let z = state.z(grid, params);
    let n = params.n as i32;
    Ok(grid.r()[1..]
        .iter()
        .zip(&z.z[1..])
        .map(|(&r, &z)| -z * r.powi(1 - n))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(n: u32) -> Params {
        Params::prototype(n, 1.0, 1.0, 0.2).unwrap()
    }

    #[test]
    fn grid_endpoints_exact() {
        let p = Params::prototype(3, 1.3, 1.0, 0.2).unwrap();
        let g = MassGrid::graded(&p, 64, 2.0).unwrap();
        assert_eq!(g.s()[0], 0.0);
        assert_eq!(g.s_max(), p.s_max());
        assert_eq!(g.r()[64], 1.3);
        assert_eq!(g.nodes(), 65);
        assert!(MassGrid::graded(&p, 16, 2.0).is_err());
        assert!(MassGrid::graded(&p, 64, 0.5).is_err());
    }

    #[test]
    fn uniform_density_accumulates_linearly() {
        for n in 2..=4 {
            let p = params(n);
            let g = MassGrid::graded(&p, 128, 2.0).unwrap();
            let u = vec![p.mu; g.nodes()];
            let w = accumulate(&u, &g, &p).unwrap();
            for (wj, sj) in w.w.iter().zip(g.s()) {
                let exact = p.mu * sj / p.dim();
                assert!((wj - exact).abs() <= 8.0 * f64::EPSILON * p.w_total());
            }
            let u_back = density_from_w(&w, &g, &p).unwrap();
            for v in u_back {
                assert!((v - p.mu).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn zero_density_and_negative_rejection() {
        let p = params(3);
        let g = MassGrid::graded(&p, 64, 2.0).unwrap();
        let w = accumulate(&vec![0.0; g.nodes()], &g, &p).unwrap();
        assert!(w.w.iter().all(|&v| v == 0.0));
        let mut u = vec![1.0; g.nodes()];
        u[5] = -1e-3;
        assert!(accumulate(&u, &g, &p).is_err());
    }

    #[test]
    fn flat_w_gives_zero_density() {
        let p = params(3);
        let g = MassGrid::graded(&p, 64, 2.0).unwrap();
        let mut w: Vec<f64> = g.s().iter().map(|s| s.min(0.3)).collect();
        w[0] = 0.0;
        let u = density_from_w(&WState { w, t: 0.0 }, &g, &p).unwrap();
        let j = g.cell_of_s(0.5) + 1;
        assert!(u[j..].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn homogeneous_state_has_zero_gradient() {
        let p = params(3);
        let g = MassGrid::graded(&p, 64, 2.0).unwrap();
        let w = WState::homogeneous(&g, &p);
        let vr = gradient_v(&w, &g, &p).unwrap();
        assert_eq!(vr.len(), g.cells());
        assert!(vr.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn gradient_squares_match_limiter_argument() {
        let p = params(3);
        let g = MassGrid::graded(&p, 64, 2.0).unwrap();
        let u: Vec<f64> = g.r().iter().map(|r| (-8.0 * r * r).exp()).collect();
        let mean = mean_density(&u, &g, &p).unwrap();
        let u: Vec<f64> = u.iter().map(|v| v / mean).collect();
        let w = accumulate(&u, &g, &p).unwrap();
        let vr = gradient_v(&w, &g, &p).unwrap();
        let z = w.z(&g, &p);
        for j in 1..g.cells() {
            let xi = limiter_argument(g.s()[j], z.z[j], 3.0);
            let v2 = vr[j - 1] * vr[j - 1];
            assert!((xi - v2).abs() <= 16.0 * f64::EPSILON * v2.max(f64::MIN_POSITIVE));
        }
        // concentrated data has z >= 0, so v_r <= 0
        assert!(vr.iter().all(|&v| v <= 0.0));
    }

    #[test]
    fn accumulate_at_matches_nodes() {
        let p = params(3);
        let g = MassGrid::graded(&p, 64, 2.0).unwrap();
        let u: Vec<f64> = g.r().iter().map(|r| 1.0 + r).collect();
        let w = accumulate(&u, &g, &p).unwrap();
        for j in [0, 1, 17, 64] {
            let v = accumulate_at(&u, &g, &p, g.r()[j]).unwrap();
            assert!((v - w.w[j]).abs() < 1e-15);
        }
        let mid = 0.5 * (g.r()[10] + g.r()[11]);
        let v = accumulate_at(&u, &g, &p, mid).unwrap();
        assert!(v > w.w[10] && v < w.w[11]);
    }
}
