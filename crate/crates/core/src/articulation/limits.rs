use std::f64::consts::PI;

use nalgebra::DVector;

use super::{distance_energy, ArticulationError, JointKind, JointSpec};
use crate::assembly::{Element, Order, PointRef};
use crate::contact::{barrier, BarrierParams};
use crate::geometry::distance::DistanceForm;

/// A joint limit as bounds on the distance between a child point and a
/// fixed reference point on the parent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LimitTarget {
    pub joint: usize,
    pub child: PointRef,
    pub parent: PointRef,
    pub lower: f64,
    pub upper: f64,
}

impl LimitTarget {
    pub fn new(index: usize, joint: &JointSpec, offsets: &[Option<usize>]) -> Option<Self> {
        let [lo, hi] = joint.limits?;
        let range = hi - lo;
        let (child, parent, lower, upper) = match joint.kind {
            JointKind::Prismatic => {
                let s_ref = lo - range.max(0.05);
                (joint.child_origin, joint.axis_point(s_ref), lo - s_ref, hi - s_ref)
            }
            JointKind::Revolute => {
                // Centre the limit interval on the part of the circle where the
                // chord is monotone in the angle.
                let theta_ref = lo - (PI - range) / 2.0;
                let chord = |t: f64| 2.0 * joint.reference_length * (0.5 * (t - theta_ref)).sin();
                (joint.child_circle_point(), joint.circle_point(theta_ref), chord(lo), chord(hi))
            }
            JointKind::Fixed => return None,
        };
        Some(Self {
            joint: index,
            child: joint.child_point(offsets, child),
            parent: joint.parent_point(offsets, parent),
            lower,
            upper,
        })
    }

    pub fn margins(&self, q: &DVector<f64>) -> (f64, f64) {
        let d = (self.child.world(q) - self.parent.world(q)).norm();
        (d - self.lower, self.upper - d)
    }
}

pub fn limit_margins(joints: &[JointSpec], offsets: &[Option<usize>], q: &DVector<f64>) -> Vec<(usize, f64, f64)> {
    joints
        .iter()
        .enumerate()
        .filter_map(|(i, j)| LimitTarget::new(i, j, offsets))
        .map(|t| {
            let (a, b) = t.margins(q);
            (t.joint, a, b)
        })
        .collect()
}

/// Barrier on both margins of every limited joint.
pub fn limit_elements(
    joints: &[JointSpec],
    offsets: &[Option<usize>],
    q: &DVector<f64>,
    params: &BarrierParams,
    order: Order,
) -> Result<Vec<Element>, ArticulationError> {
    let mut out = Vec::new();
    for (i, joint) in joints.iter().enumerate() {
        let Some(t) = LimitTarget::new(i, joint, offsets) else { continue };
        let (m_lo, m_hi) = t.margins(q);
        if m_lo <= 0.0 || m_hi <= 0.0 {
            return Err(ArticulationError::LimitViolated { joint: joint.name.clone(), margin: m_lo.min(m_hi) });
        }
        if m_lo >= params.dhat && m_hi >= params.dhat {
            continue;
        }
        let kappa = params.kappa;
        let el = distance_energy(
            &[t.child, t.parent],
            q,
            &[(DistanceForm::PointPoint, vec![0, 1])],
            |_, s| {
                let d = s.sqrt();
                let (b1, db1, ddb1) = barrier(d - t.lower, params.dhat)?;
                let (b2, db2, ddb2) = barrier(t.upper - d, params.dhat)?;
                let (ds, dss) = (0.5 / d, -0.25 / (d * d * d));
                Ok((
                    kappa * (b1 + b2),
                    kappa * (db1 - db2) * ds,
                    kappa * ((ddb1 + ddb2) * ds * ds + (db1 - db2) * dss),
                ))
            },
            order,
        )?;
        out.push(el);
    }
    Ok(out)
}

/// Largest step fraction in `[0, 1]` along `q0 → q1` that keeps every limit
/// margin above `s` times its start value (conservative advancement).
pub fn limit_toi(
    joints: &[JointSpec],
    offsets: &[Option<usize>],
    q0: &DVector<f64>,
    q1: &DVector<f64>,
    s: f64,
    min_step: f64,
) -> Result<f64, ArticulationError> {
    let mut toi: f64 = 1.0;
    for (i, joint) in joints.iter().enumerate() {
        let Some(t) = LimitTarget::new(i, joint, offsets) else { continue };
        let start = (t.child.world(q0), t.parent.world(q0));
        let end = (t.child.world(q1), t.parent.world(q1));
        let lp = ((end.0 - start.0) - (end.1 - start.1)).norm();
        let margin = |a: f64| {
            let d = ((start.0 + (end.0 - start.0) * a) - (start.1 + (end.1 - start.1) * a)).norm();
            (d - t.lower).min(t.upper - d)
        };
        let m0 = margin(0.0);
        if m0 <= 0.0 {
            return Err(ArticulationError::LimitViolated { joint: joint.name.clone(), margin: m0 });
        }
        if lp == 0.0 {
            continue;
        }
        let g = s * m0;
        let mut a = 0.0;
        let mut step = (1.0 - s) * m0 / lp;
        let reached = loop {
            let m = margin(a + step);
            if a > 0.0 && m < g {
                break a;
            }
            a += step;
            if a >= 1.0 {
                break 1.0;
            }
            step = 0.9 * m / lp;
            if step < min_step {
                break a;
            }
        };
        toi = toi.min(reached);
    }
    Ok(toi)
}
