//! Shared fixtures for the benchmarks.

use fluxlim_core::initdata::make_profile;
use fluxlim_core::transform::accumulate;
use fluxlim_core::{InitialProfile, MassGrid, Params, WState};

/// Indicator data of radius `r0` for `n = 3`, `α = 0.1` on a grid with
/// `cells` cells and grading `p`.
pub fn indicator_fixture(cells: usize, r0: f64, grading: f64) -> (Params, MassGrid, WState) {
    let params = Params::prototype(3, 1.0, 1.0, 0.1).expect("valid parameters");
    let grid = MassGrid::graded(&params, cells, grading).expect("valid grid");
    let u0 =
        make_profile(&InitialProfile::indicator(r0), &params, &grid).expect("profile fits grid");
    let w0 = accumulate(&u0, &grid, &params).expect("accumulation");
    (params, grid, w0)
}
