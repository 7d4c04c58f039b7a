//! Time integration of the degenerate scalar problem
//!
//! ```text
//! w_t = n² s^{2-2/n} w_ss + n z w_s f(s^{2/n-2} z²),   z = w - μs/n,
//! w(0,t) = 0,  w(Rⁿ,t) = μRⁿ/n,
//! ```
//!
//! by an IMEX scheme: the degenerate diffusion is advanced θ-implicitly with a
//! tridiagonal solve, the nonlinear transport term explicitly with upwinding.
//! The unknown carried through a step is `z`, so the homogeneous state
//! `z ≡ 0` is reproduced bit for bit.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::model::{LimiterSpec, Params};
use crate::transform::{MassGrid, WState};

/// Spatial discretization of the transport term `n z f w_s`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Advection {
    /// First-order one-sided difference from the upwind side.
    Upwind,
    /// Upwind difference corrected towards second order with a minmod limiter.
    #[default]
    Limited,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverControls {
    pub t_end: f64,
    pub cfl_safety: f64,
    pub dt_min: f64,
    /// Measure `dt_min` as a fraction of the first stable step instead of in
    /// absolute time, so that one setting fits every grid and concentration.
    pub relative_dt_min: bool,
    pub dt_max: f64,
    /// Escape multiple of `max(sup u0, μ)` that counts as blow-up.
    pub blowup_factor: f64,
    pub max_steps: usize,
    /// Implicitness of the diffusion term; 1 is backward Euler.
    pub theta: f64,
    pub advection: Advection,
    /// Snapshot every `snapshot_interval` time units ...
    pub snapshot_interval: f64,
    /// ... and whenever `sup u` grew by this factor since the last snapshot.
    pub snapshot_growth: f64,
}

impl Default for SolverControls {
    fn default() -> Self {
        Self {
            t_end: 1.0,
            cfl_safety: 0.4,
            dt_min: 1e-3,
            relative_dt_min: true,
            dt_max: 1e-2,
            blowup_factor: 1000.0,
            max_steps: 5_000_000,
            theta: 1.0,
            advection: Advection::Limited,
            snapshot_interval: 0.02,
            snapshot_growth: 1.25,
        }
    }
}

impl SolverControls {
    /// Smallest admissible step, given the stable step at `t = 0`.
    pub fn dt_floor(&self, initial_dt: f64) -> f64 {
        if self.relative_dt_min {
            self.dt_min * initial_dt
        } else {
            self.dt_min
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("t_end", self.t_end),
            ("dt_min", self.dt_min),
            ("dt_max", self.dt_max),
            ("blowup_factor", self.blowup_factor),
            ("snapshot_interval", self.snapshot_interval),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.cfl_safety > 0.0 && self.cfl_safety <= 1.0) {
            return Err(Error::Config(format!(
                "cfl_safety must lie in (0,1], got {}",
                self.cfl_safety
            )));
        }
        if !(0.0..=1.0).contains(&self.theta) {
            return Err(Error::Config(format!(
                "theta must lie in [0,1], got {}",
                self.theta
            )));
        }
        if !self.relative_dt_min && self.dt_min > self.dt_max {
            return Err(Error::Config("dt_min exceeds dt_max".into()));
        }
        if self.max_steps == 0 {
            return Err(Error::Config("max_steps must be positive".into()));
        }
        if !(self.snapshot_growth > 1.0) {
            return Err(Error::Config("snapshot_growth must exceed 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum RunStatus {
    CompletedHorizon,
    BlowupDetected { t_est: f64, sup_u_final: f64 },
    StepFailure { t: f64, reason: String },
}

impl RunStatus {
    pub fn is_blowup(&self) -> bool {
        matches!(self, Self::BlowupDetected { .. })
    }
}

/// One row of the diagnostic time series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeriesRow {
    pub t: f64,
    pub sup_u: f64,
    pub mass: f64,
    pub min_z: f64,
    pub dt: f64,
    pub phi: Option<f64>,
    pub psi: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunOutcome {
    pub status: RunStatus,
    pub snapshots: Vec<WState>,
    pub series: Vec<SeriesRow>,
}

impl RunOutcome {
    pub fn sup_u_max(&self) -> f64 {
        self.series
            .iter()
            .map(|r| r.sup_u)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min_z_min(&self) -> f64 {
        self.series
            .iter()
            .map(|r| r.min_z)
            .fold(f64::INFINITY, f64::min)
    }

    pub fn final_time(&self) -> f64 {
        self.series.last().map_or(0.0, |r| r.t)
    }
}

/// Grid-dependent coefficients and scratch space for repeated steps.
#[derive(Debug, Clone)]
pub struct WSolver<'a> {
    params: &'a Params,
    grid: &'a MassGrid,
    /// `n² s^{2-2/n} · 2/(h_-(h_-+h_+))` and the `h_+` counterpart.
    diff_lo: Vec<f64>,
    diff_hi: Vec<f64>,
    /// `s^{2/n-2}` at interior nodes.
    xi_scale: Vec<f64>,
    slope: f64,
    // scratch
    z: Vec<f64>,
    speed: Vec<f64>,
    rhs: Vec<f64>,
    cprime: Vec<f64>,
}

impl<'a> WSolver<'a> {
    pub fn new(params: &'a Params, grid: &'a MassGrid) -> Result<Self> {
        if grid.dim() != params.n {
            return domain("grid and parameters disagree on the dimension");
        }
        let n = params.dim();
        let s = grid.s();
        let nodes = grid.nodes();
        let mut diff_lo = vec![0.0; nodes];
        let mut diff_hi = vec![0.0; nodes];
        let mut xi_scale = vec![0.0; nodes];
        for j in 1..grid.cells() {
            let hm = s[j] - s[j - 1];
            let hp = s[j + 1] - s[j];
            let d = n * n * s[j].powf(2.0 - 2.0 / n);
            diff_lo[j] = d * 2.0 / (hm * (hm + hp));
            diff_hi[j] = d * 2.0 / (hp * (hm + hp));
            xi_scale[j] = s[j].powf(2.0 / n - 2.0);
        }
        Ok(Self {
            params,
            grid,
            diff_lo,
            diff_hi,
            xi_scale,
            slope: params.slope(),
            z: vec![0.0; nodes],
            speed: vec![0.0; nodes],
            rhs: vec![0.0; nodes],
            cprime: vec![0.0; nodes],
        })
    }

    pub fn params(&self) -> &Params {
        self.params
    }

    pub fn grid(&self) -> &MassGrid {
        self.grid
    }

    /// Loads `z = w - μs/n` and the transport speeds `a = n z f(s^{2/n-2} z²)`.
    fn load(&mut self, w: &[f64]) {
        let s = self.grid.s();
        let n = self.params.dim();
        let last = self.grid.cells();
        let limiter: &LimiterSpec = &self.params.limiter;
        self.z[0] = 0.0;
        self.z[last] = 0.0;
        self.speed[0] = 0.0;
        self.speed[last] = 0.0;
        for j in 1..last {
            let z = w[j] - self.slope * s[j];
            self.z[j] = z;
            self.speed[j] = if z == 0.0 {
                0.0
            } else {
                n * z * limiter.value(self.xi_scale[j] * z * z)
            };
        }
    }

    /// Stability-limited step for the loaded state.
    fn stable_dt(&self, controls: &SolverControls) -> f64 {
        let s = self.grid.s();
        let explicit_diffusion = 1.0 - controls.theta;
        let mut rate: f64 = 0.0;
        for j in 1..self.grid.cells() {
            let a = self.speed[j];
            let h = if a >= 0.0 {
                s[j + 1] - s[j]
            } else {
                s[j] - s[j - 1]
            };
            let local = a.abs() / h + explicit_diffusion * (self.diff_lo[j] + self.diff_hi[j]);
            rate = rate.max(local);
        }
        if rate > 0.0 {
            (controls.cfl_safety / rate).min(controls.dt_max)
        } else {
            controls.dt_max
        }
    }

    /// Time step chosen by the stability controller for `state`.
    pub fn adaptive_dt(&mut self, state: &WState, controls: &SolverControls) -> f64 {
        self.load(&state.w);
        self.stable_dt(controls)
    }

    /// Approximation of `w_s` at node `j` from the side the transport comes from.
    #[inline]
    fn upwind_slope(&self, j: usize, scheme: Advection) -> f64 {
        let s = self.grid.s();
        let z = &self.z;
        let last = self.grid.cells();
        let d = |i: usize| (z[i + 1] - z[i]) / (s[i + 1] - s[i]) + self.slope;
        let dm = d(j - 1);
        let dp = d(j);
        let hm = s[j] - s[j - 1];
        let hp = s[j + 1] - s[j];
        if self.speed[j] >= 0.0 {
            if scheme == Advection::Upwind || j + 1 >= last {
                return dp;
            }
            let hpp = s[j + 2] - s[j + 1];
            let central = hp / (hm + hp) * (dp - dm);
            let one_sided = hp / (hp + hpp) * (d(j + 1) - dp);
            dp - minmod(central, one_sided)
        } else {
            if scheme == Advection::Upwind || j < 2 {
                return dm;
            }
            let hmm = s[j - 1] - s[j - 2];
            let central = hm / (hm + hp) * (dp - dm);
            let one_sided = hm / (hm + hmm) * (dm - d(j - 2));
            dm + minmod(central, one_sided)
        }
    }

    /// Advances `state` by `dt`. Boundary rows are reimposed exactly.
    pub fn step(&mut self, state: &WState, dt: f64, controls: &SolverControls) -> Result<WState> {
        self.load(&state.w);
        self.step_loaded(state, dt, controls)
    }

    fn step_loaded(
        &mut self,
        state: &WState,
        dt: f64,
        controls: &SolverControls,
    ) -> Result<WState> {
        let last = self.grid.cells();
        if dt == 0.0 {
            return Ok(state.clone());
        }
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::Step {
                t: state.t,
                reason: format!("invalid time step {dt}"),
            });
        }
        let theta = controls.theta;
        for j in 1..last {
            let z = &self.z;
            let transport = if self.speed[j] == 0.0 {
                0.0
            } else {
                self.speed[j] * self.upwind_slope(j, controls.advection)
            };
            let diffusion = if theta < 1.0 {
                (1.0 - theta)
                    * (self.diff_lo[j] * (z[j - 1] - z[j]) + self.diff_hi[j] * (z[j + 1] - z[j]))
            } else {
                0.0
            };
            self.rhs[j] = z[j] + dt * (transport + diffusion);
        }
        self.solve_implicit(theta * dt)?;

        let s = self.grid.s();
        let mut w = Vec::with_capacity(last + 1);
        w.push(0.0);
        for j in 1..last {
            let v = self.slope * s[j] + self.rhs[j];
            if !v.is_finite() {
                return Err(Error::Step {
                    t: state.t,
                    reason: format!("non-finite value at node {j}"),
                });
            }
            w.push(v);
        }
        w.push(self.params.w_total());
        Ok(WState { w, t: state.t + dt })
    }

    /// Solves `(I - τ D L) z = rhs` on interior nodes with `z_0 = z_N = 0`,
    /// in place in `rhs`.
    fn solve_implicit(&mut self, tau: f64) -> Result<()> {
        let last = self.grid.cells();
        if tau == 0.0 {
            return Ok(());
        }
        let (lo, hi) = (&self.diff_lo, &self.diff_hi);
        let rhs = &mut self.rhs;
        let cp = &mut self.cprime;
        // Thomas algorithm; the matrix is a strictly diagonally dominant M-matrix.
        let mut prev_c = 0.0;
        let mut prev_d = 0.0;
        for j in 1..last {
            let a = -tau * lo[j];
            let b = 1.0 + tau * (lo[j] + hi[j]);
            let c = -tau * hi[j];
            let denom = b - a * prev_c;
            if !(denom.abs() > 0.0) || !denom.is_finite() {
                return Err(Error::Step {
                    t: f64::NAN,
                    reason: format!("tridiagonal pivot vanished at row {j}"),
                });
            }
            prev_c = c / denom;
            prev_d = (rhs[j] - a * prev_d) / denom;
            cp[j] = prev_c;
            rhs[j] = prev_d;
        }
        for j in (1..last - 1).rev() {
            rhs[j] -= cp[j] * rhs[j + 1];
        }
        Ok(())
    }
}

#[inline]
fn minmod(a: f64, b: f64) -> f64 {
    if a > 0.0 && b > 0.0 {
        a.min(b)
    } else if a < 0.0 && b < 0.0 {
        a.max(b)
    } else {
        0.0
    }
}

/// Single step with a caller-supplied `dt`.
pub fn step(
    state: &WState,
    params: &Params,
    grid: &MassGrid,
    controls: &SolverControls,
    dt: f64,
) -> Result<WState> {
    WSolver::new(params, grid)?.step(state, dt, controls)
}

/// Stability-limited time step for `state`.
pub fn adaptive_dt(
    state: &WState,
    params: &Params,
    grid: &MassGrid,
    controls: &SolverControls,
) -> Result<f64> {
    Ok(WSolver::new(params, grid)?.adaptive_dt(state, controls))
}

/// Physical mass `∫_Ω u = n|B_1| w(Rⁿ)`.
pub fn total_mass(state: &WState, params: &Params) -> f64 {
    params.dim() * params.unit_ball_volume() * state.w[state.w.len() - 1]
}

/// Integrates from `w0` until the horizon, detected blow-up, or failure.
pub fn integrate(
    w0: &WState,
    params: &Params,
    grid: &MassGrid,
    controls: &SolverControls,
) -> Result<RunOutcome> {
    integrate_observed(w0, params, grid, controls, |_| (None, None))
}

/// Functional values `(φ, ψ)` recorded alongside each series row.
pub type Observation = (Option<f64>, Option<f64>);

/// [`integrate`], filling the `phi`/`psi` columns of every series row from
/// `observe`.
pub fn integrate_observed(
    w0: &WState,
    params: &Params,
    grid: &MassGrid,
    controls: &SolverControls,
    mut observe: impl FnMut(&WState) -> Observation,
) -> Result<RunOutcome> {
    controls.validate()?;
    w0.validate(grid, params, 1e-9)?;
    let mut solver = WSolver::new(params, grid)?;

    let mut state = w0.clone();
    state.w[0] = 0.0;
    *state.w.last_mut().expect("grid has nodes") = params.w_total();

    let mut row = |st: &WState, dt: f64| {
        let (phi, psi) = observe(st);
        SeriesRow {
            t: st.t,
            sup_u: st.sup_u(grid),
            mass: total_mass(st, params),
            min_z: st.min_z(grid, params),
            dt,
            phi,
            psi,
        }
    };

    let initial = row(&state, 0.0);
    let threshold = controls.blowup_factor * initial.sup_u.max(params.mu);
    let mut series = vec![initial];
    let mut snapshots = vec![state.clone()];
    let mut next_snapshot = state.t + controls.snapshot_interval;
    let mut last_snapshot_sup = initial.sup_u;
    let mut crossing = (initial.sup_u >= threshold).then_some(state.t);
    solver.load(&state.w);
    let dt_floor = controls.dt_floor(solver.stable_dt(controls));
    let mut steps = 0usize;

    let status = loop {
        let remaining = controls.t_end - state.t;
        if remaining <= 0.0 {
            break RunStatus::CompletedHorizon;
        }
        if steps >= controls.max_steps {
            break RunStatus::StepFailure {
                t: state.t,
                reason: format!("step budget of {} exhausted", controls.max_steps),
            };
        }
        solver.load(&state.w);
        let dt_stable = solver.stable_dt(controls);
        if let Some(t_est) = crossing {
            if dt_stable < 10.0 * dt_floor {
                break RunStatus::BlowupDetected {
                    t_est,
                    sup_u_final: series.last().map_or(f64::NAN, |r| r.sup_u),
                };
            }
        }
        if dt_stable < dt_floor {
            break RunStatus::StepFailure {
                t: state.t,
                reason: format!("time step {dt_stable:e} fell below dt_min without blow-up"),
            };
        }
        // Land exactly on the horizon instead of leaving a sliver.
        let dt = if remaining <= dt_stable * (1.0 + 1e-9) {
            remaining
        } else {
            dt_stable
        };
        state = match solver.step_loaded(&state, dt, controls) {
            Ok(next) => next,
            Err(Error::Step { reason, .. }) => {
                break RunStatus::StepFailure { t: state.t, reason };
            }
            Err(e) => return Err(e),
        };
        if remaining <= dt_stable * (1.0 + 1e-9) {
            state.t = controls.t_end;
        }
        steps += 1;

        let r = row(&state, dt);
        if crossing.is_none() && r.sup_u >= threshold {
            crossing = Some(state.t);
        }
        let done = state.t >= controls.t_end;
        if state.t >= next_snapshot
            || r.sup_u >= controls.snapshot_growth * last_snapshot_sup
            || done
        {
            snapshots.push(state.clone());
            last_snapshot_sup = r.sup_u;
            while next_snapshot <= state.t {
                next_snapshot += controls.snapshot_interval;
            }
        }
        series.push(r);
    };

    if snapshots.last().map(|s| s.t) != Some(state.t) {
        snapshots.push(state);
    }
    Ok(RunOutcome {
        status,
        snapshots,
        series,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::transform::accumulate;

    fn setup(n: u32, alpha: f64, cells: usize) -> (Params, MassGrid) {
        let p = Params::prototype(n, 1.0, 1.0, alpha).unwrap();
        let g = MassGrid::graded(&p, cells, 2.0).unwrap();
        (p, g)
    }

    fn concentrated(p: &Params, g: &MassGrid, eps: f64) -> WState {
        let u: Vec<f64> = g
            .r()
            .iter()
            .map(|r| 1.0 + eps * (-(r / 0.3).powi(2)).exp())
            .collect();
        let mut w = accumulate(&u, g, p).unwrap();
        let scale = p.w_total() / w.w[g.cells()];
        w.w.iter_mut().for_each(|v| *v *= scale);
        w
    }

    #[test]
    fn stationary_step_is_exact() {
        for n in 2..=4 {
            let (p, g) = setup(n, 0.2, 128);
            let w = WState::homogeneous(&g, &p);
            for theta in [0.5, 1.0] {
                let c = SolverControls {
                    theta,
                    ..Default::default()
                };
                let out = step(&w, &p, &g, &c, 1e-3).unwrap();
                for (a, b) in out.w.iter().zip(&w.w) {
                    assert!((a - b).abs() <= 4.0 * f64::EPSILON * b.abs());
                }
            }
        }
    }

    #[test]
    fn zero_dt_is_identity() {
        let (p, g) = setup(3, 0.2, 64);
        let w = concentrated(&p, &g, 2.0);
        let out = step(&w, &p, &g, &SolverControls::default(), 0.0).unwrap();
        assert_eq!(out, w);
    }

    #[test]
    fn one_step_keeps_comparison() {
        let (p, g) = setup(3, 0.0, 256);
        let w = concentrated(&p, &g, 0.05);
        let c = SolverControls::default();
        let dt = adaptive_dt(&w, &p, &g, &c).unwrap();
        let out = step(&w, &p, &g, &c, dt).unwrap();
        assert!(out.min_z(&g, &p) >= -1e-10);
        assert_eq!(out.w[0], 0.0);
        assert_eq!(out.w[256], p.w_total());
    }

    #[test]
    fn stationary_dt_is_diffusive_bound() {
        let (p, g) = setup(3, 0.2, 64);
        let w = WState::homogeneous(&g, &p);
        let c = SolverControls {
            theta: 0.5,
            dt_max: 1.0,
            ..Default::default()
        };
        let dt = adaptive_dt(&w, &p, &g, &c).unwrap();
        let s = g.s();
        let bound = (1..64)
            .map(|j| {
                let hm = s[j] - s[j - 1];
                let hp = s[j + 1] - s[j];
                let d = 9.0 * s[j].powf(4.0 / 3.0);
                hm * hp / (2.0 * 0.5 * d)
            })
            .fold(f64::INFINITY, f64::min);
        assert!((dt - c.cfl_safety * bound).abs() <= 1e-12 * dt);
        // fully implicit diffusion leaves only the cap
        let c1 = SolverControls {
            theta: 1.0,
            dt_max: 0.125,
            ..Default::default()
        };
        assert_eq!(adaptive_dt(&w, &p, &g, &c1).unwrap(), 0.125);
    }

    #[test]
    fn dt_shrinks_with_transport_speed() {
        let (p, g) = setup(3, 0.2, 128);
        let c = SolverControls {
            dt_max: 1.0,
            ..Default::default()
        };
        let mild = adaptive_dt(&concentrated(&p, &g, 0.5), &p, &g, &c).unwrap();
        let strong = adaptive_dt(&concentrated(&p, &g, 5.0), &p, &g, &c).unwrap();
        assert!(strong <= mild);
    }

    #[test]
    fn uniform_data_stays_put() {
        let (p, g) = setup(3, 0.45, 128);
        let w = WState::homogeneous(&g, &p);
        let c = SolverControls {
            t_end: 0.5,
            ..Default::default()
        };
        let out = integrate(&w, &p, &g, &c).unwrap();
        assert_eq!(out.status, RunStatus::CompletedHorizon);
        let last = out.snapshots.last().unwrap();
        assert_eq!(last.t, 0.5);
        for (a, b) in last.w.iter().zip(&w.w) {
            assert!((a - b).abs() <= 1e-10 * p.w_total());
        }
    }

    #[test]
    fn invalid_controls_are_rejected() {
        let c = SolverControls {
            theta: 1.5,
            ..Default::default()
        };
        assert!(c.validate().is_err());
        let c = SolverControls {
            cfl_safety: 0.0,
            ..Default::default()
        };
        assert!(c.validate().is_err());
    }
}
