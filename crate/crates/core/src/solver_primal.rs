//! Conservative finite-volume solver for the radial system in the original
//! `(u, v_r)` variables, used as an independent reference for the mass-variable
//! solver on horizons before any blow-up.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::initdata::{make_profile, InitialProfile};
use crate::model::Params;
use crate::solver_w::{SolverControls, WSolver};
use crate::transform::{accumulate, cell_mass, density_from_w, MassGrid};

/// Density on the `r`-nodes of a grid at time `t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadialState {
    pub u: Vec<f64>,
    pub t: f64,
}

/// Control volumes, face radii and face areas of the node-centred mesh.
#[derive(Debug, Clone)]
pub struct PrimalMesh {
    volume: Vec<f64>,
    face_area: Vec<f64>,
    face_gap: Vec<f64>,
}

impl PrimalMesh {
    pub fn new(grid: &MassGrid) -> Self {
        let r = grid.r();
        let n = f64::from(grid.dim());
        let cells = grid.cells();
        let faces: Vec<f64> = (0..cells).map(|j| 0.5 * (r[j] + r[j + 1])).collect();
        let mut volume = Vec::with_capacity(cells + 1);
        for j in 0..=cells {
            let lo = if j == 0 { 0.0 } else { faces[j - 1] };
            let hi = if j == cells { r[cells] } else { faces[j] };
            volume.push((hi.powf(n) - lo.powf(n)) / n);
        }
        let face_area = faces.iter().map(|f| f.powf(n - 1.0)).collect();
        let face_gap = (0..cells).map(|j| r[j + 1] - r[j]).collect();
        Self {
            volume,
            face_area,
            face_gap,
        }
    }

    /// `∫ ρ^{n-1} u dρ` as the sum of control-volume contributions.
    pub fn mass(&self, u: &[f64]) -> f64 {
        self.volume.iter().zip(u).map(|(v, u)| v * u).sum()
    }

    pub fn volumes(&self) -> &[f64] {
        &self.volume
    }
}

impl RadialState {
    /// Rescales `u` so that its finite-volume mean equals `μ`.
    pub fn from_density(u: Vec<f64>, params: &Params, grid: &MassGrid) -> Result<Self> {
        if u.len() != grid.nodes() {
            return domain(format!(
                "density has {} values, grid has {} nodes",
                u.len(),
                grid.nodes()
            ));
        }
        if u.iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
            return domain("density must be finite and nonnegative");
        }
        let mesh = PrimalMesh::new(grid);
        let mean = mesh.mass(&u) / (params.s_max() / params.dim());
        if !(mean > 0.0) {
            return domain("density has zero mass");
        }
        let scale = params.mu / mean;
        Ok(Self {
            u: u.into_iter().map(|v| v * scale).collect(),
            t: 0.0,
        })
    }

    /// Finite-volume mean density.
    pub fn mean(&self, params: &Params, grid: &MassGrid) -> f64 {
        PrimalMesh::new(grid).mass(&self.u) / (params.s_max() / params.dim())
    }
}

/// `v_r(r) = r^{1-n} ∫_0^r ρ^{n-1}(μ - u) dρ` at every node, with the same
/// piecewise-linear quadrature as the mass accumulation.
pub fn elliptic_solve(state: &RadialState, params: &Params, grid: &MassGrid) -> Result<Vec<f64>> {
    if state.u.len() != grid.nodes() {
        return domain("density length does not match the grid");
    }
    if let Some(bad) = state.u.iter().find(|v| !(**v >= 0.0)) {
        return domain(format!("density must be nonnegative, found {bad}"));
    }
    Ok(elliptic_unchecked(&state.u, params, grid))
}

fn elliptic_unchecked(u: &[f64], params: &Params, grid: &MassGrid) -> Vec<f64> {
    let n = params.dim();
    let (r, s) = (grid.r(), grid.s());
    let mu = params.mu;
    let mut vr = vec![0.0; u.len()];
    let mut acc = 0.0;
    for j in 0..grid.cells() {
        acc += cell_mass(n, r[j], r[j + 1], s[j], s[j + 1], mu - u[j], mu - u[j + 1]);
        vr[j + 1] = acc * r[j + 1].powi(1 - params.n as i32);
    }
    vr
}

/// Explicit conservative stepper.
#[derive(Debug, Clone)]
pub struct PrimalSolver<'a> {
    params: &'a Params,
    grid: &'a MassGrid,
    mesh: PrimalMesh,
    flux: Vec<f64>,
}

impl<'a> PrimalSolver<'a> {
    pub fn new(params: &'a Params, grid: &'a MassGrid) -> Result<Self> {
        if grid.dim() != params.n {
            return domain("grid and parameters disagree on the dimension");
        }
        Ok(Self {
            params,
            grid,
            mesh: PrimalMesh::new(grid),
            flux: vec![0.0; grid.cells()],
        })
    }

    pub fn mesh(&self) -> &PrimalMesh {
        &self.mesh
    }

    /// Fills `self.flux` with the outward face fluxes `A (u_r - u f(v_r²) v_r)`
    /// and returns the largest advective face speed.
    fn fluxes(&mut self, u: &[f64]) -> f64 {
        let vr = elliptic_unchecked(u, self.params, self.grid);
        let limiter = &self.params.limiter;
        let mut speed_max: f64 = 0.0;
        for j in 0..self.grid.cells() {
            let v = 0.5 * (vr[j] + vr[j + 1]);
            let drift = limiter.value(v * v) * v;
            speed_max = speed_max.max(drift.abs());
            let ubar = 0.5 * (u[j] + u[j + 1]);
            let grad = (u[j + 1] - u[j]) / self.mesh.face_gap[j];
            self.flux[j] = self.mesh.face_area[j] * (grad - ubar * drift);
        }
        speed_max
    }

    /// Largest stable step for the current density.
    pub fn stable_dt(&mut self, u: &[f64], controls: &SolverControls) -> f64 {
        let speed = self.fluxes(u);
        let mut rate: f64 = 0.0;
        let cells = self.grid.cells();
        for j in 0..=cells {
            let mut conduct = 0.0;
            let mut area = 0.0;
            if j > 0 {
                conduct += self.mesh.face_area[j - 1] / self.mesh.face_gap[j - 1];
                area += self.mesh.face_area[j - 1];
            }
            if j < cells {
                conduct += self.mesh.face_area[j] / self.mesh.face_gap[j];
                area += self.mesh.face_area[j];
            }
            let v = self.mesh.volume[j];
            rate = rate.max((2.0 * conduct + speed * area) / v);
        }
        controls.cfl_safety / rate
    }

    pub fn step(&mut self, state: &RadialState, dt: f64) -> Result<RadialState> {
        self.fluxes(&state.u);
        let cells = self.grid.cells();
        let mut u = state.u.clone();
        for (j, uj) in u.iter_mut().enumerate() {
            let out = if j < cells { self.flux[j] } else { 0.0 };
            let inn = if j > 0 { self.flux[j - 1] } else { 0.0 };
            *uj += dt * (out - inn) / self.mesh.volume[j];
            if !uj.is_finite() {
                return Err(Error::Step {
                    t: state.t,
                    reason: format!("non-finite density at node {j}"),
                });
            }
        }
        Ok(RadialState { u, t: state.t + dt })
    }
}

/// Advances to `controls.t_end` with stability-limited steps.
pub fn advance_primal(
    state: &RadialState,
    params: &Params,
    grid: &MassGrid,
    controls: &SolverControls,
) -> Result<RadialState> {
    controls.validate()?;
    let mut solver = PrimalSolver::new(params, grid)?;
    let mut st = state.clone();
    let mut steps = 0usize;
    let dt_floor = controls.dt_floor(solver.stable_dt(&st.u, controls));
    while st.t < controls.t_end {
        if steps >= controls.max_steps {
            return Err(Error::Step {
                t: st.t,
                reason: "step budget exhausted".into(),
            });
        }
        let dt = solver.stable_dt(&st.u, controls);
        if !(dt >= dt_floor) {
            return Err(Error::Step {
                t: st.t,
                reason: format!("time step {dt:e} below dt_min"),
            });
        }
        let remaining = controls.t_end - st.t;
        let last = remaining <= dt * (1.0 + 1e-9);
        st = solver.step(&st, if last { remaining } else { dt })?;
        if last {
            st.t = controls.t_end;
        }
        steps += 1;
    }
    Ok(st)
}

/// Discrepancy between the two formulations on one grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CrosscheckLevel {
    pub cells: usize,
    pub steps: usize,
    /// `‖u_primal - u_w‖∞ / ‖u0‖∞` at the check time.
    pub discrepancy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrosscheckReport {
    pub t_check: f64,
    pub levels: Vec<CrosscheckLevel>,
}

impl CrosscheckReport {
    /// Ratios of consecutive discrepancies, coarse over fine.
    pub fn reduction_factors(&self) -> Vec<f64> {
        self.levels
            .windows(2)
            .map(|p| p[0].discrepancy / p[1].discrepancy)
            .collect()
    }
}

/// Runs both solvers from the same data to `t_check` on grids uniform in `r`
/// with the given cell counts. Both use the same constant step, chosen from
/// the explicit stability limit of the primal scheme, so that the time error
/// scales like the square of the mesh width.
pub fn crosscheck(
    profile: &InitialProfile,
    params: &Params,
    t_check: f64,
    cells: &[usize],
    controls: &SolverControls,
) -> Result<CrosscheckReport> {
    if !(t_check > 0.0 && t_check.is_finite()) {
        return domain(format!("t_check must be positive, got {t_check}"));
    }
    let mut levels = Vec::with_capacity(cells.len());
    for &n_cells in cells {
        let grid = MassGrid::uniform_in_r(params, n_cells)?;
        let raw = make_profile(profile, params, &grid)?;
        let u0 = RadialState::from_density(raw, params, &grid)?;

        let mut primal = PrimalSolver::new(params, &grid)?;
        let dt_stable = primal.stable_dt(&u0.u, controls);
        let steps = (t_check / dt_stable).ceil().max(1.0) as usize;
        let dt = t_check / steps as f64;

        let mut w = accumulate(&u0.u, &grid, params)?;
        let mut wsolver = WSolver::new(params, &grid)?;
        let mut u = u0.clone();
        for _ in 0..steps {
            u = primal.step(&u, dt)?;
            w = wsolver.step(&w, dt, controls)?;
        }
        let uw = density_from_w(&w, &grid, params)?;
        let scale = u0.u.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let diff =
            u.u.iter()
                .zip(&uw)
                .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        levels.push(CrosscheckLevel {
            cells: n_cells,
            steps,
            discrepancy: diff / scale,
        });
    }
    Ok(CrosscheckReport { t_check, levels })
}

/// CSV with header `r,u,vr`.
pub fn primal_csv(state: &RadialState, params: &Params, grid: &MassGrid) -> Result<String> {
    let vr = elliptic_solve(state, params, grid)?;
    let mut out = String::from("r,u,vr\n");
    for ((r, u), v) in grid.r().iter().zip(&state.u).zip(&vr) {
        out.push_str(&format!("{r:e},{u:e},{v:e}\n"));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::initdata::ProfileKind;
    use crate::transform::gradient_v;

    fn setup(n: u32, alpha: f64, cells: usize) -> (Params, MassGrid) {
        let p = Params::prototype(n, 1.0, 1.0, alpha).unwrap();
        let g = MassGrid::uniform_in_r(&p, cells).unwrap();
        (p, g)
    }

    fn bump(p: &Params, g: &MassGrid) -> RadialState {
        let kind = ProfileKind::SmoothBump {
            r0: 0.3,
            sharpness: 3.0,
        };
        let u = make_profile(&InitialProfile::new(kind), p, g).unwrap();
        RadialState::from_density(u, p, g).unwrap()
    }

    #[test]
    fn uniform_state_is_stationary() {
        let (p, g) = setup(3, 0.45, 64);
        let st = RadialState::from_density(vec![1.0; 65], &p, &g).unwrap();
        assert!(elliptic_solve(&st, &p, &g)
            .unwrap()
            .iter()
            .all(|&v| v == 0.0));
        let mut solver = PrimalSolver::new(&p, &g).unwrap();
        let next = solver.step(&st, 1e-4).unwrap();
        for (a, b) in next.u.iter().zip(&st.u) {
            assert!((a - b).abs() <= 4.0 * f64::EPSILON * b);
        }
    }

    #[test]
    fn mass_is_conserved() {
        let (p, g) = setup(3, 0.45, 64);
        let st = bump(&p, &g);
        let mut solver = PrimalSolver::new(&p, &g).unwrap();
        let m0 = solver.mesh().mass(&st.u);
        let dt = solver.stable_dt(&st.u, &SolverControls::default());
        let mut cur = st;
        for _ in 0..1000 {
            cur = solver.step(&cur, dt).unwrap();
        }
        let m1 = solver.mesh().mass(&cur.u);
        assert!((m1 - m0).abs() <= 1e-12 * m0);
        assert!((cur.mean(&p, &g) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn elliptic_matches_mass_variable_gradient() {
        let (p, g) = setup(3, 0.2, 128);
        // normalized under the accumulation quadrature so that v_r(R) = 0
        let kind = ProfileKind::SmoothBump {
            r0: 0.3,
            sharpness: 3.0,
        };
        let u = make_profile(&InitialProfile::new(kind), &p, &g).unwrap();
        let st = RadialState { u, t: 0.0 };
        let a = elliptic_solve(&st, &p, &g).unwrap();
        let b = gradient_v(&accumulate(&st.u, &g, &p).unwrap(), &g, &p).unwrap();
        let scale = a.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for (x, y) in a[1..].iter().zip(&b) {
            assert!((x - y).abs() <= 1e-12 * scale, "{x} {y} {scale}");
        }
        assert!(a.iter().all(|&v| v <= 0.0));
    }

    #[test]
    fn crosscheck_of_uniform_data_is_exact() {
        let p = Params::prototype(3, 1.0, 1.0, 0.45).unwrap();
        let rep = crosscheck(
            &InitialProfile::new(ProfileKind::Uniform),
            &p,
            0.01,
            &[64],
            &SolverControls::default(),
        )
        .unwrap();
        assert!(rep.levels[0].discrepancy <= 1e-10);
    }
}
