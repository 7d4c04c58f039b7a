//! Simulation and verification tools for the flux-limited parabolic-elliptic
//! Keller-Segel system in a ball, in radial symmetry.
//!
//! The radial problem is written in the accumulated mass
//! `w(s,t) = ∫_0^{s^{1/n}} ρ^{n-1} u(ρ,t) dρ`, `s = rⁿ`, which turns the
//! two-component system into one degenerate scalar parabolic equation.

pub mod diagnostics;
pub mod error;
pub mod harness;
pub mod initdata;
pub mod model;
mod quadrature;
pub mod solver_primal;
pub mod solver_w;
pub mod transform;

pub use diagnostics::{CheckRecord, GrowthFit, MomentConfig};
pub use error::{Error, Result};
pub use initdata::{InitialProfile, ProfileKind};
pub use model::{GammaWindow, LimiterSpec, Params};
pub use solver_w::{RunOutcome, RunStatus, SolverControls};
pub use transform::{MassGrid, WState};
