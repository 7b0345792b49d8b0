use std::f64::consts::PI;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::{distance_energy, ArticulationError, JointKind, JointSpec};
use crate::assembly::{Element, Order, PointRef};
use crate::dynamics::{AffineBody, Vec12};
use crate::geometry::distance::DistanceForm;

pub const DEFAULT_KAPPA_MOTOR: f64 = 1e8;
pub const MAX_KAPPA_MOTOR: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MotorMode {
    Position,
    Velocity,
    Torque,
}

/// Per-step motor command. `target` is a joint coordinate (position), a
/// joint-space velocity (velocity) or a force in N (torque).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MotorCommand {
    pub joint: usize,
    pub mode: MotorMode,
    pub target: f64,
}

/// A command turned into either a coordinate target held by a penalty or
/// a force, for the current step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResolvedMotor {
    pub joint: usize,
    pub target: Option<f64>,
    pub force: Option<f64>,
    pub kappa: f64,
}

/// Velocity commands become one-step position targets; targets are kept
/// `margin` inside the joint limits.
pub fn resolve_motor(
    cmd: &MotorCommand,
    joint: &JointSpec,
    coordinate: f64,
    h: f64,
    margin: f64,
    kappa: f64,
) -> Result<(ResolvedMotor, Option<String>), ArticulationError> {
    if joint.kind == JointKind::Fixed {
        return Err(ArticulationError::InvalidMotor { joint: joint.name.clone(), reason: "fixed joints have no motor".into() });
    }
    if !cmd.target.is_finite() {
        return Err(ArticulationError::InvalidMotor { joint: joint.name.clone(), reason: "non-finite target".into() });
    }
    let target = match cmd.mode {
        MotorMode::Torque => {
            return Ok((ResolvedMotor { joint: cmd.joint, target: None, force: Some(cmd.target), kappa }, None));
        }
        MotorMode::Position => cmd.target,
        MotorMode::Velocity => coordinate + h * cmd.target,
    };
    let mut warning = None;
    let mut clamped = target;
    if let Some([lo, hi]) = joint.limits {
        clamped = target.clamp(lo + margin, hi - margin);
        if clamped != target {
            warning = Some(format!("motor target {target} on joint {} clamped to {clamped}", joint.name));
        }
    }
    Ok((ResolvedMotor { joint: cmd.joint, target: Some(clamped), force: None, kappa }, warning))
}

/// Child point and the two parent references with their target distances.
fn motor_stencil(joint: &JointSpec, target: f64) -> (PointRefSpec, [f64; 2]) {
    let l = joint.reference_length;
    match joint.kind {
        JointKind::Prismatic => (
            PointRefSpec {
                child: joint.child_origin,
                parents: [joint.axis_point(target - l), joint.axis_point(target) + joint.normal * l],
            },
            [l, l],
        ),
        _ => {
            let third = 2.0 * PI / 3.0;
            (
                PointRefSpec {
                    child: joint.child_circle_point(),
                    parents: [joint.circle_point(target - third), joint.circle_point(target + third)],
                },
                [3f64.sqrt() * l; 2],
            )
        }
    }
}

struct PointRefSpec {
    child: crate::geometry::Vec3,
    parents: [crate::geometry::Vec3; 2],
}

/// `κ_m Σ (dₖ − rₖ)²` for every penalty-held motor.
pub fn motor_elements(
    motors: &[ResolvedMotor],
    joints: &[JointSpec],
    offsets: &[Option<usize>],
    q: &DVector<f64>,
    order: Order,
) -> Result<Vec<Element>, ArticulationError> {
    let mut out = Vec::new();
    for m in motors {
        let Some(target) = m.target else { continue };
        let joint = &joints[m.joint];
        let (spec, r) = motor_stencil(joint, target);
        let points = [
            joint.child_point(offsets, spec.child),
            joint.parent_point(offsets, spec.parents[0]),
            joint.parent_point(offsets, spec.parents[1]),
        ];
        let terms = [(DistanceForm::PointPoint, vec![0, 1]), (DistanceForm::PointPoint, vec![0, 2])];
        let kappa = m.kappa;
        out.push(distance_energy(
            &points,
            q,
            &terms,
            |k, s| {
                let d = s.sqrt();
                let e = d - r[k];
                Ok((kappa * e * e, kappa * e / d, kappa * r[k] / (2.0 * s * d)))
            },
            order,
        )?);
    }
    Ok(out)
}

/// Generalized force of each torque-mode motor on its child body, along
/// the tangent of the child's trajectory.
pub fn motor_force(
    motor: &ResolvedMotor,
    joints: &[JointSpec],
    offsets: &[Option<usize>],
    q: &DVector<f64>,
) -> Option<(usize, Vec12)> {
    let f = motor.force?;
    let joint = &joints[motor.joint];
    offsets[joint.child]?;
    let a = joint.world_axis(offsets, q);
    let (rest, dir) = match joint.kind {
        JointKind::Prismatic => (joint.child_origin, a),
        JointKind::Revolute => {
            let x = joint.child_point(offsets, joint.child_circle_point()).world(q);
            let o = joint.parent_point(offsets, joint.origin).world(q);
            (joint.child_circle_point(), a.cross(&(x - o)).normalize())
        }
        JointKind::Fixed => return None,
    };
    Some((joint.child, AffineBody::point_force(&rest, &(dir * f))))
}

/// Keeps the child origin on the parent's sliding line for prismatic
/// joints whose line could not be eliminated exactly.
pub fn lateral_penalty_elements(
    penalty_joints: &[usize],
    joints: &[JointSpec],
    offsets: &[Option<usize>],
    q: &DVector<f64>,
    kappa: f64,
    order: Order,
) -> Result<Vec<Element>, ArticulationError> {
    penalty_joints
        .iter()
        .map(|&j| {
            let joint = &joints[j];
            let points: [PointRef; 3] = [
                joint.child_point(offsets, joint.child_origin),
                joint.parent_point(offsets, joint.origin),
                joint.parent_point(offsets, joint.axis_point(joint.reference_length)),
            ];
            distance_energy(&points, q, &[(DistanceForm::PointLine, vec![0, 1, 2])], |_, s| Ok((kappa * s, kappa, 0.0)), order)
        })
        .collect()
}
