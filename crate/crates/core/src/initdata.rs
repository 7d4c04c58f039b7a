//! Radial initial densities and checks of the concentration conditions used
//! by the blow-up statement.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::model::Params;
use crate::transform::{accumulate, accumulate_at, mean_density, MassGrid};

/// Minimum width of the smoothed edge of an indicator profile, in grid cells.
pub const INDICATOR_EDGE_CELLS: f64 = 3.0;

fn default_edge_fraction() -> f64 {
    0.1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProfileKind {
    /// `u0 ≡ μ`.
    Uniform,
    /// `u0 ∝ 1 + sharpness · exp(-(r/r0)²)`.
    SmoothBump { r0: f64, sharpness: f64 },
    /// Indicator of `B_{r0}` with a C² edge just inside `r0`. The edge is
    /// `edge_fraction · r0` wide, but never narrower than three cells.
    Indicator {
        r0: f64,
        #[serde(default = "default_edge_fraction")]
        edge_fraction: f64,
    },
    /// Samples `(r_i, u_i)` interpolated linearly; nodes must cover `[0, R]`.
    Tabulated { r: Vec<f64>, u: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitialProfile {
    #[serde(flatten)]
    pub kind: ProfileKind,
}

impl InitialProfile {
    pub fn new(kind: ProfileKind) -> Self {
        Self { kind }
    }

    pub fn indicator(r0: f64) -> Self {
        Self::new(ProfileKind::Indicator {
            r0,
            edge_fraction: default_edge_fraction(),
        })
    }
}

/// Quintic smoothstep: C² transition from 0 at `t<=0` to 1 at `t>=1`.
fn smoothstep(t: f64) -> f64 {
    let t = t.clamp(0.0, 1.0);
    t * t * t * (t * (6.0 * t - 15.0) + 10.0)
}

/// Nodal density on `grid.r()`, normalized so that its mean is `params.mu`.
pub fn make_profile(
    profile: &InitialProfile,
    params: &Params,
    grid: &MassGrid,
) -> Result<Vec<f64>> {
    let r = grid.r();
    let raw: Vec<f64> = match &profile.kind {
        ProfileKind::Uniform => return Ok(vec![params.mu; grid.nodes()]),
        ProfileKind::SmoothBump { r0, sharpness } => {
            check_r0(*r0, params)?;
            if !(*sharpness >= 0.0 && sharpness.is_finite()) {
                return domain(format!("sharpness must be >= 0, got {sharpness}"));
            }
            r.iter()
                .map(|&rj| 1.0 + sharpness * (-(rj / r0).powi(2)).exp())
                .collect()
        }
        ProfileKind::Indicator { r0, edge_fraction } => {
            check_r0(*r0, params)?;
            if !(*edge_fraction >= 0.0 && *edge_fraction < 1.0) {
                return domain(format!(
                    "edge_fraction must lie in [0, 1), got {edge_fraction}"
                ));
            }
            // last node inside the ball; the interpolant vanishes beyond it
            let j = (grid.r().partition_point(|&x| x <= *r0) - 1).max(1);
            let rin = r[j];
            let edge = (INDICATOR_EDGE_CELLS * (r[j] - r[j - 1])).max(edge_fraction * r0);
            if rin - edge <= r[1] {
                return domain(format!(
                    "r0={r0} too small for a continuous indicator on this grid (edge width {edge:e})"
                ));
            }
            r.iter().map(|&rj| smoothstep((rin - rj) / edge)).collect()
        }
        ProfileKind::Tabulated { r: rt, u: ut } => {
            if rt.len() < 2 || rt.len() != ut.len() {
                return domain("tabulated profile needs >= 2 samples of equal length");
            }
            if rt[0] > 0.0 || *rt.last().unwrap() < params.radius {
                return domain("tabulated profile must cover [0, R]");
            }
            if rt.windows(2).any(|p| !(p[1] > p[0])) {
                return domain("tabulated radii must be strictly increasing");
            }
            if ut.iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
                return domain("tabulated density must be nonnegative");
            }
            r.iter()
                .map(|&x| {
                    let i = rt.partition_point(|&v| v <= x).clamp(1, rt.len() - 1);
                    let t = (x - rt[i - 1]) / (rt[i] - rt[i - 1]);
                    ut[i - 1] + t * (ut[i] - ut[i - 1])
                })
                .collect()
        }
    };
    normalize(raw, params, grid)
}

fn check_r0(r0: f64, params: &Params) -> Result<()> {
    if !(r0 > 0.0 && r0 < params.radius) {
        return domain(format!("r0 must lie in (0, R={}), got {r0}", params.radius));
    }
    Ok(())
}

/// Rescales `u` to mean `μ` under the accumulation quadrature.
pub fn normalize(mut u: Vec<f64>, params: &Params, grid: &MassGrid) -> Result<Vec<f64>> {
    let mean = mean_density(&u, grid, params)?;
    if !(mean > 0.0) {
        return domain("profile has zero mass");
    }
    let scale = params.mu / mean;
    u.iter_mut().for_each(|v| *v *= scale);
    Ok(u)
}

/// Outcome of a nodal inequality check; `margin` is the worst slack.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub holds: bool,
    pub margin: f64,
}

/// Ball averages dominate the global mean: `w0(s) ≥ μs/n` at every node.
pub fn check_i1(u0: &[f64], params: &Params, grid: &MassGrid) -> Result<Check> {
    let w0 = accumulate(u0, grid, params)?;
    let slope = params.slope();
    let margin =
        w0.w.iter()
            .zip(grid.s())
            .map(|(&w, &s)| w - slope * s)
            .fold(f64::INFINITY, f64::min);
    Ok(Check {
        holds: margin >= -1e-12 * params.w_total(),
        margin,
    })
}

/// `w0(r0ⁿ) ≥ μRⁿ/(2n)`, i.e. `⨍_{B_{r0}} u0 ≥ (μ/2)(R/r0)ⁿ`.
pub fn check_182(u0: &[f64], r0: f64, params: &Params, grid: &MassGrid) -> Result<Check> {
    if !(r0 > 0.0 && r0 < params.radius) {
        return domain(format!("r0 must lie in (0, R), got {r0}"));
    }
    let inner = accumulate_at(u0, grid, params, r0)?;
    let margin = inner - 0.5 * params.w_total();
    Ok(Check {
        holds: margin >= 0.0,
        margin,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn setup() -> (Params, MassGrid) {
        let p = Params::prototype(3, 1.0, 1.0, 0.1).unwrap();
        let g = MassGrid::graded(&p, 256, 2.0).unwrap();
        (p, g)
    }

    #[test]
    fn uniform_is_mu() {
        let (p, g) = setup();
        let u = make_profile(&InitialProfile::new(ProfileKind::Uniform), &p, &g).unwrap();
        assert!(u.iter().all(|&v| v == 1.0));
        let c = check_i1(&u, &p, &g).unwrap();
        assert!(c.holds);
        assert!(c.margin.abs() < 1e-15);
        let c = check_182(&u, 0.5, &p, &g).unwrap();
        assert!(!c.holds);
        assert!((c.margin - (0.125 - 0.5) / 3.0).abs() < 1e-12);
    }

    #[test]
    fn indicator_is_concentrated() {
        let (p, g) = setup();
        let u = make_profile(&InitialProfile::indicator(0.3), &p, &g).unwrap();
        assert!(u.iter().all(|&v| v >= 0.0));
        assert!(u.windows(2).all(|w| w[1] <= w[0]));
        assert!((mean_density(&u, &g, &p).unwrap() - 1.0).abs() < 1e-13);
        assert!(check_i1(&u, &p, &g).unwrap().holds);
        let c = check_182(&u, 0.3, &p, &g).unwrap();
        assert!(c.holds);
        // all of the mass sits inside the ball
        assert!((c.margin - 0.5 * p.w_total()).abs() < 1e-12);
        let avg = accumulate_at(&u, &g, &p, 0.3).unwrap() * 3.0 / 0.027;
        assert!(avg >= 0.5 * (1.0f64 / 0.3).powi(3));
    }

    #[test]
    fn indicator_too_narrow_is_rejected() {
        let (p, g) = setup();
        assert!(make_profile(&InitialProfile::indicator(0.02), &p, &g).is_err());
        assert!(make_profile(&InitialProfile::indicator(1.0), &p, &g).is_err());
    }

    #[test]
    fn bump_flattens_to_uniform() {
        let (p, g) = setup();
        let mut prev = f64::INFINITY;
        for sharpness in [1.0, 0.1, 0.01] {
            let kind = ProfileKind::SmoothBump { r0: 0.3, sharpness };
            let u = make_profile(&InitialProfile::new(kind), &p, &g).unwrap();
            let dev = u.iter().map(|v| (v - 1.0).abs()).fold(0.0, f64::max);
            assert!(dev < prev);
            prev = dev;
        }
        assert!(prev < 0.01);
    }

    #[test]
    fn increasing_profile_fails_i1() {
        let (p, g) = setup();
        let raw: Vec<f64> = g.r().iter().map(|r| 2.0 * r.powi(3)).collect();
        let u = normalize(raw, &p, &g).unwrap();
        let c = check_i1(&u, &p, &g).unwrap();
        assert!(!c.holds);
        assert!(c.margin < 0.0);
    }

    #[test]
    fn normalization_is_idempotent() {
        let (p, g) = setup();
        let kind = ProfileKind::SmoothBump {
            r0: 0.2,
            sharpness: 4.0,
        };
        let u = make_profile(&InitialProfile::new(kind), &p, &g).unwrap();
        let again = normalize(u.clone(), &p, &g).unwrap();
        for (a, b) in u.iter().zip(&again) {
            assert!((a - b).abs() <= 1e-14 * a.abs());
        }
    }

    #[test]
    fn tabulated_profile_interpolates() {
        let (p, g) = setup();
        let kind = ProfileKind::Tabulated {
            r: vec![0.0, 0.5, 1.0],
            u: vec![2.0, 1.0, 0.0],
        };
        let u = make_profile(&InitialProfile::new(kind), &p, &g).unwrap();
        assert!(u.windows(2).all(|w| w[1] <= w[0]));
        assert!(check_i1(&u, &p, &g).unwrap().holds);
        let bad = ProfileKind::Tabulated {
            r: vec![0.1, 1.0],
            u: vec![1.0, 1.0],
        };
        assert!(make_profile(&InitialProfile::new(bad), &p, &g).is_err());
    }
}
