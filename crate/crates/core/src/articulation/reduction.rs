use nalgebra::{DMatrix, DVector, SMatrix};
use nalgebra_sparse::{CooMatrix, CscMatrix};

use super::{ArticulationError, JointKind, JointSpec};
use crate::dynamics::{point_jacobian, AffineBody};
use crate::geometry::Vec3;

/// Linear map `q = S y + b` from reduced coordinates to the stacked
/// coordinates of all dynamic bodies, eliminating every linear joint
/// constraint exactly.
#[derive(Debug, Clone)]
pub struct DofReduction {
    pub s: DMatrix<f64>,
    pub s_csc: CscMatrix<f64>,
    pub b: DVector<f64>,
    /// Offset of each body's 12 coordinates in `q`; `None` for static bodies.
    pub offsets: Vec<Option<usize>>,
    /// Joints whose sliding line could not be made linear (moving parent
    /// orientation); enforced by a penalty instead.
    pub penalty_joints: Vec<usize>,
    /// Reduced coordinates of the construction pose.
    pub y0: DVector<f64>,
}

impl DofReduction {
    pub fn n_full(&self) -> usize {
        self.s.nrows()
    }

    pub fn n_reduced(&self) -> usize {
        self.s.ncols()
    }

    pub fn full(&self, y: &DVector<f64>) -> DVector<f64> {
        &self.s * y + &self.b
    }
}

type Row12 = SMatrix<f64, 1, 12>;

/// Linear constraint rows `C q_child = D q_parent + e`.
struct Rows {
    c: Vec<Row12>,
    d: Vec<Row12>,
    e: Vec<f64>,
}

fn constraint_rows(
    joint: &JointSpec,
    parent_static: bool,
    parent_q: &DVector<f64>,
    parent_orientation_fixed: bool,
) -> Rows {
    let mut rows = Rows { c: Vec::new(), d: Vec::new(), e: Vec::new() };
    let mut push = |c: Row12, d: Row12| {
        if parent_static {
            rows.e.push((d * parent_q)[0]);
            rows.d.push(Row12::zeros());
        } else {
            rows.e.push(0.0);
            rows.d.push(d);
        }
        rows.c.push(c);
    };
    match joint.kind {
        JointKind::Fixed | JointKind::Revolute => {
            for (xp, xc) in joint.connection_points() {
                let (jp, jc) = (point_jacobian(&xp), point_jacobian(&xc));
                for i in 0..3 {
                    push(jc.row(i).into_owned(), jp.row(i).into_owned());
                }
            }
        }
        JointKind::Prismatic => {
            for k in 3..12 {
                let mut r = Row12::zeros();
                r[k] = 1.0;
                push(r, r);
            }
            if parent_orientation_fixed {
                let a = crate::dynamics::affine_map(&crate::dynamics::Vec12::from_column_slice(parent_q.as_slice()));
                let w = (a * joint.axis).normalize();
                let u1 = (a * joint.normal).normalize();
                let u1 = (u1 - w * w.dot(&u1)).normalize();
                let u2 = w.cross(&u1);
                let (jp, jc) = (point_jacobian(&joint.origin), point_jacobian(&joint.child_origin));
                for u in [u1, u2] {
                    push(u.transpose() * jc, u.transpose() * jp);
                }
            }
        }
    }
    rows
}

/// Eliminates joint constraints over the joint forest.
pub fn build_reduction(bodies: &[AffineBody], joints: &[JointSpec]) -> Result<DofReduction, ArticulationError> {
    let n_bodies = bodies.len();
    let mut offsets = vec![None; n_bodies];
    let mut n_full = 0;
    for (i, b) in bodies.iter().enumerate() {
        if !b.is_static {
            offsets[i] = Some(n_full);
            n_full += 12;
        }
    }
    let mut incoming: Vec<Option<usize>> = vec![None; n_bodies];
    for (j, joint) in joints.iter().enumerate() {
        if bodies[joint.child].is_static {
            continue;
        }
        if let Some(prev) = incoming[joint.child] {
            return Err(ArticulationError::MultipleParents {
                body: bodies[joint.child].name.clone(),
                joints: [joints[prev].name.clone(), joint.name.clone()],
            });
        }
        incoming[joint.child] = Some(j);
    }

    // Per-body map q_b = S_b y + b_b, filled parents-first.
    let mut s_rows: Vec<Option<DMatrix<f64>>> = vec![None; n_bodies];
    let mut b_rows: Vec<Option<DVector<f64>>> = vec![None; n_bodies];
    let mut n_y = 0;
    let mut y0: Vec<f64> = Vec::new();
    let mut penalty_joints = Vec::new();
    let mut done = vec![false; n_bodies];
    let mut progress = true;
    while progress {
        progress = false;
        for i in 0..n_bodies {
            if done[i] || bodies[i].is_static {
                continue;
            }
            let q_child = DVector::from_column_slice(bodies[i].q.as_slice());
            let Some(j) = incoming[i] else {
                // Free root: all 12 coordinates are reduced coordinates.
                let mut s = DMatrix::zeros(12, n_y + 12);
                s.view_mut((0, n_y), (12, 12)).fill_with_identity();
                s_rows[i] = Some(s);
                b_rows[i] = Some(DVector::zeros(12));
                y0.extend(q_child.iter());
                n_y += 12;
                done[i] = true;
                progress = true;
                continue;
            };
            let joint = &joints[j];
            let p = joint.parent;
            let parent_static = bodies[p].is_static;
            if !parent_static && !done[p] {
                continue;
            }
            let parent_q = DVector::from_column_slice(bodies[p].q.as_slice());
            let orientation_fixed = parent_static
                || s_rows[p].as_ref().is_some_and(|s| s.rows(3, 9).iter().all(|v| v.abs() < 1e-14));
            if joint.kind == JointKind::Prismatic && !orientation_fixed {
                penalty_joints.push(j);
            }
            let parent_b = if parent_static {
                parent_q.clone()
            } else {
                b_rows[p].clone().expect("parent reduced")
            };
            let rows = constraint_rows(joint, parent_static, &parent_b, orientation_fixed);
            let k = rows.c.len();
            let c = DMatrix::from_fn(k, 12, |r, col| rows.c[r][col]);
            let d = DMatrix::from_fn(k, 12, |r, col| rows.d[r][col]);
            let e = DVector::from_column_slice(&rows.e);

            let ctc = c.transpose() * &c;
            let eig = ctc.symmetric_eigen();
            let max_ev = eig.eigenvalues.max();
            let null: Vec<usize> = (0..12).filter(|&t| eig.eigenvalues[t] <= 1e-10 * max_ev).collect();
            if 12 - null.len() != k {
                return Err(ArticulationError::RankDeficient { joint: joint.name.clone(), rank: 12 - null.len(), rows: k });
            }
            let cct = &c * c.transpose();
            let c_pinv = c.transpose() * cct.try_inverse().ok_or_else(|| ArticulationError::RankDeficient {
                joint: joint.name.clone(),
                rank: 12 - null.len(),
                rows: k,
            })?;
            let nmat = DMatrix::from_fn(12, null.len(), |r, col| eig.eigenvectors[(r, null[col])]);

            let n_new = null.len();
            let mut s = DMatrix::zeros(12, n_y + n_new);
            let mut bb = &c_pinv * &e;
            if !parent_static {
                let sp = s_rows[p].as_ref().expect("parent reduced");
                let cd = &c_pinv * &d;
                s.view_mut((0, 0), (12, sp.ncols())).copy_from(&(&cd * sp));
                bb += &cd * b_rows[p].as_ref().expect("parent reduced");
            }
            s.view_mut((0, n_y), (12, n_new)).copy_from(&nmat);
            y0.extend((nmat.transpose() * (&q_child - &bb)).iter());
            s_rows[i] = Some(s);
            b_rows[i] = Some(bb);
            n_y += n_new;
            done[i] = true;
            progress = true;
        }
    }
    if let Some(i) = (0..n_bodies).find(|&i| !done[i] && !bodies[i].is_static) {
        return Err(ArticulationError::KinematicLoop { body: bodies[i].name.clone() });
    }

    let mut s = DMatrix::zeros(n_full, n_y);
    let mut b = DVector::zeros(n_full);
    for i in 0..n_bodies {
        if let Some(o) = offsets[i] {
            let si = s_rows[i].as_ref().expect("reduced");
            s.view_mut((o, 0), (12, si.ncols())).copy_from(si);
            b.rows_mut(o, 12).copy_from(b_rows[i].as_ref().expect("reduced"));
        }
    }
    let mut coo = CooMatrix::new(n_full, n_y);
    for c in 0..n_y {
        for r in 0..n_full {
            let v = s[(r, c)];
            if v != 0.0 {
                coo.push(r, c, v);
            }
        }
    }
    let y0 = DVector::from_vec(y0);
    let reduction = DofReduction { s_csc: CscMatrix::from(&coo), s, b, offsets, penalty_joints, y0 };

    // The construction pose must be representable.
    let mut q0 = DVector::zeros(n_full);
    for (i, body) in bodies.iter().enumerate() {
        if let Some(o) = reduction.offsets[i] {
            q0.rows_mut(o, 12).copy_from(&body.q);
        }
    }
    let residual = (reduction.full(&reduction.y0) - &q0).amax();
    if residual > 1e-9 {
        let joint = joints
            .iter()
            .find(|j| connection_residual(j, &reduction.offsets, &q0) > 1e-9)
            .map(|j| j.name.clone())
            .unwrap_or_default();
        return Err(ArticulationError::InitialViolation { joint, residual });
    }
    Ok(reduction)
}

/// Largest world-space mismatch among a joint's linear constraints.
pub fn connection_residual(joint: &JointSpec, offsets: &[Option<usize>], q: &DVector<f64>) -> f64 {
    let pp = |x: Vec3| joint.parent_point(offsets, x).world(q);
    let cp = |x: Vec3| joint.child_point(offsets, x).world(q);
    match joint.kind {
        JointKind::Fixed | JointKind::Revolute => joint
            .connection_points()
            .into_iter()
            .map(|(xp, xc)| (pp(xp) - cp(xc)).norm())
            .fold(0.0, f64::max),
        JointKind::Prismatic => {
            let dp = |x: Vec3| crate::assembly::PointRef::direction(offsets[joint.parent], x).world(q);
            let dc = |x: Vec3| crate::assembly::PointRef::direction(offsets[joint.child], x).world(q);
            // Orientation lock, checked on the three parent basis vectors.
            let rot = [Vec3::x(), Vec3::y(), Vec3::z()].iter().map(|e| (dp(*e) - dc(*e)).norm()).fold(0.0, f64::max);
            let w = joint.world_axis(offsets, q);
            let r = cp(joint.child_origin) - pp(joint.origin);
            let lateral = (r - w * w.dot(&r)).norm();
            rot.max(lateral)
        }
    }
}
