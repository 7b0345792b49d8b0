//! Additive conservative-advancement CCD on linear vertex trajectories.

use thiserror::Error;

use super::distance::{edge_edge_distance_sq_robust, point_triangle_distance_sq_robust};
use super::{CandidateKind, Vec3};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CcdParams {
    /// Fraction `s` of the start gap that may be consumed: advancement stops
    /// once the gap falls below `s` times its initial value.
    pub conservative_factor: f64,
    /// Once an advancement increment drops below this, the current TOI is returned.
    pub min_step: f64,
    pub max_iterations: usize,
}

impl Default for CcdParams {
    fn default() -> Self {
        Self { conservative_factor: 0.1, min_step: 2f64.powi(-16), max_iterations: 1_000_000 }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum CcdError {
    #[error("start distance {distance:e} is not above the minimum separation {min_separation:e}")]
    StartViolated { distance: f64, min_separation: f64 },
}

fn stencil_distance_sq(kind: CandidateKind, x: &[Vec3; 4]) -> f64 {
    match kind {
        CandidateKind::PointTriangle => point_triangle_distance_sq_robust(&x[0], &x[1], &x[2], &x[3]),
        CandidateKind::EdgeEdge => edge_edge_distance_sq_robust(&x[0], &x[1], &x[2], &x[3]),
    }
}

/// Earliest conservative time of impact in `(0, 1]` for a stencil moving
/// linearly from `start` to `end`, or `None` when the pair stays apart over
/// the whole step.
///
/// Stencil layout: `[p, t0, t1, t2]` for point-triangle, `[a0, a1, b0, b1]`
/// for edge-edge.
pub fn ccd_toi(
    kind: CandidateKind,
    start: &[Vec3; 4],
    end: &[Vec3; 4],
    min_separation: f64,
    params: &CcdParams,
) -> Result<Option<f64>, CcdError> {
    let xi = min_separation;
    let mut disp: [Vec3; 4] = std::array::from_fn(|i| end[i] - start[i]);
    let mean = disp.iter().sum::<Vec3>() / 4.0;
    for d in &mut disp {
        *d -= mean;
    }
    let lp = match kind {
        CandidateKind::PointTriangle => disp[0].norm() + disp[1].norm().max(disp[2].norm()).max(disp[3].norm()),
        CandidateKind::EdgeEdge => disp[0].norm().max(disp[1].norm()) + disp[2].norm().max(disp[3].norm()),
    };

    let mut x = *start;
    let mut d_sq = stencil_distance_sq(kind, &x);
    let d = d_sq.sqrt();
    if d <= xi {
        return Err(CcdError::StartViolated { distance: d, min_separation: xi });
    }
    if lp == 0.0 {
        return Ok(None);
    }

    let s = params.conservative_factor;
    let gap = |d_sq: f64| {
        let d = d_sq.sqrt();
        (d_sq - xi * xi) / (d + xi)
    };
    let g = s * gap(d_sq);
    let mut toi = 0.0;
    let mut tl = (1.0 - s) * gap(d_sq) / lp;
    for _ in 0..params.max_iterations {
        for (xi, di) in x.iter_mut().zip(&disp) {
            *xi += tl * di;
        }
        d_sq = stencil_distance_sq(kind, &x);
        if toi > 0.0 && gap(d_sq) < g {
            return Ok(Some(toi));
        }
        toi += tl;
        if toi > 1.0 {
            return Ok(None);
        }
        tl = 0.9 * gap(d_sq) / lp;
        if toi > 0.0 && tl < params.min_step {
            return Ok(Some(toi));
        }
    }
    Ok(Some(toi))
}
