//! Joints as exact linear eliminations, plus barrier limits and motor
//! penalties acting through point distances.

mod joint;
mod limits;
mod motor;
mod reduction;

pub use joint::{JointKind, JointSpec};
pub use limits::{limit_elements, limit_margins, limit_toi, LimitTarget};
pub use motor::{
    lateral_penalty_elements, motor_elements, motor_force, resolve_motor, MotorCommand, MotorMode, ResolvedMotor,
    DEFAULT_KAPPA_MOTOR, MAX_KAPPA_MOTOR,
};
pub use reduction::{build_reduction, connection_residual, DofReduction};

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::assembly::{Element, Order, PointRef};
use crate::contact::ContactError;
use crate::geometry::distance::derivatives::distance_sq_derivatives;
use crate::geometry::distance::DistanceForm;
use crate::linalg::project_psd_dyn;

#[derive(Debug, Error, PartialEq)]
pub enum ArticulationError {
    #[error("joint {joint}: {reason}")]
    InvalidJoint { joint: String, reason: String },
    #[error("body {body} has two parent joints ({joints:?})")]
    MultipleParents { body: String, joints: [String; 2] },
    #[error("kinematic loop through body {body}")]
    KinematicLoop { body: String },
    #[error("joint {joint}: constraint rank {rank} < {rows} (coincident or collinear attachment points)")]
    RankDeficient { joint: String, rank: usize, rows: usize },
    #[error("joint {joint}: initial pose violates the joint by {residual:e}")]
    InitialViolation { joint: String, residual: f64 },
    #[error("joint {joint} is at or beyond its limit (margin {margin:e})")]
    LimitViolated { joint: String, margin: f64 },
    #[error("motor on joint {joint}: {reason}")]
    InvalidMotor { joint: String, reason: String },
    #[error(transparent)]
    Contact(#[from] ContactError),
}

/// Energy `Σ φₖ(sₖ)` where each `sₖ` is a squared point distance over a
/// subset of `points`; `phi(k, s)` returns the value and first two
/// derivatives in `s`. The stencil Hessian is PSD-projected.
pub(crate) fn distance_energy(
    points: &[PointRef],
    q: &DVector<f64>,
    terms: &[(DistanceForm, Vec<usize>)],
    phi: impl Fn(usize, f64) -> Result<(f64, f64, f64), ArticulationError>,
    order: Order,
) -> Result<Element, ArticulationError> {
    let x: Vec<_> = points.iter().map(|p| p.world(q)).collect();
    let n = 3 * points.len();
    let mut energy = 0.0;
    let mut grad = DVector::zeros(n);
    let mut hess = DMatrix::zeros(n, n);
    for (k, (form, idx)) in terms.iter().enumerate() {
        let sub: Vec<_> = idx.iter().map(|&i| x[i]).collect();
        if order == Order::Value {
            let s = crate::geometry::distance::derivatives::distance_sq_value(*form, &sub);
            energy += phi(k, s)?.0;
            continue;
        }
        let (s, gs, hs) = distance_sq_derivatives(*form, &sub);
        let (v, vs, vss) = phi(k, s)?;
        energy += v;
        for (a, &ia) in idx.iter().enumerate() {
            for r in 0..3 {
                grad[3 * ia + r] += vs * gs[3 * a + r];
                for (b, &ib) in idx.iter().enumerate() {
                    for c in 0..3 {
                        hess[(3 * ia + r, 3 * ib + c)] +=
                            vss * gs[3 * a + r] * gs[3 * b + c] + vs * hs[(3 * a + r, 3 * b + c)];
                    }
                }
            }
        }
    }
    let hess = (order == Order::Hessian).then(|| project_psd_dyn(&hess));
    Ok(Element::scatter(energy, points, &grad, hess.as_ref(), order))
}
