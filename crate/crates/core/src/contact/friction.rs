use nalgebra::{DMatrix, DVector, Matrix2, Matrix3x2, Vector2};

use super::pairs::{ContactPair, ContactScene};
use super::{barrier, pair_mu, BarrierParams};
use crate::assembly::{Element, Order, PointRef};
use crate::geometry::Vec3;
use crate::par::{self, Execution};

/// Friction data frozen at the start of a step for one contact pair.
#[derive(Debug, Clone, PartialEq)]
pub struct FrictionAnchor {
    pub points: [PointRef; 4],
    pub weights: [f64; 4],
    /// Stencil positions at the start of the step.
    pub previous: [Vec3; 4],
    /// Orthonormal tangent basis of the contact plane.
    pub tangent: Matrix3x2<f64>,
    /// Normal force magnitude `κ m |b'(d)|`.
    pub normal_force: f64,
    pub mu: f64,
}

fn tangent_basis(n: &Vec3) -> Matrix3x2<f64> {
    let k = n.iamin();
    let mut e = Vec3::zeros();
    e[k] = 1.0;
    let t1 = n.cross(&e).normalize();
    let t2 = n.cross(&t1);
    Matrix3x2::from_columns(&[t1, t2])
}

/// Anchors for every active pair with nonzero normal force and friction.
pub fn build_anchors(
    scene: &ContactScene<'_>,
    positions: &[Vec<Vec3>],
    pairs: &[ContactPair],
    params: &BarrierParams,
) -> Vec<FrictionAnchor> {
    pairs
        .iter()
        .filter_map(|pair| {
            let c = &pair.candidate;
            let mu = pair_mu(scene.bodies[c.body_a].mu, scene.bodies[c.body_b].mu);
            let (_, db, _) = barrier(pair.distance, params.dhat).ok()?;
            let normal_force = params.kappa * pair.mollifier * db.abs();
            if mu <= 0.0 || normal_force <= 0.0 {
                return None;
            }
            let previous = stencil_positions(scene, positions, pair)?;
            let r: Vec3 = previous.iter().zip(&pair.weights).map(|(x, w)| x * *w).sum();
            let norm = r.norm();
            if norm == 0.0 {
                return None;
            }
            Some(FrictionAnchor {
                points: pair.stencil,
                weights: pair.weights,
                previous,
                tangent: tangent_basis(&(r / norm)),
                normal_force,
                mu,
            })
        })
        .collect()
}

fn stencil_positions(scene: &ContactScene<'_>, positions: &[Vec<Vec3>], pair: &ContactPair) -> Option<[Vec3; 4]> {
    let c = &pair.candidate;
    let (ma, mb) = (&scene.bodies[c.body_a].mesh, &scene.bodies[c.body_b].mesh);
    let ids: [(usize, usize); 4] = match c.kind {
        crate::geometry::CandidateKind::PointTriangle => {
            let t = mb.triangles().get(c.prim_b)?;
            [(c.body_a, c.prim_a), (c.body_b, t[0]), (c.body_b, t[1]), (c.body_b, t[2])]
        }
        crate::geometry::CandidateKind::EdgeEdge => {
            let (ea, eb) = (ma.edges().get(c.prim_a)?, mb.edges().get(c.prim_b)?);
            [(c.body_a, ea[0]), (c.body_a, ea[1]), (c.body_b, eb[0]), (c.body_b, eb[1])]
        }
    };
    Some(ids.map(|(b, v)| positions[b][v]))
}

/// Smooth mobilizer `f₀(y)` with its first two derivatives, `ε = ε_v h`.
/// `f₀(0) = 0`, `f₀' = 1` for `y ≥ ε`.
pub fn friction_mobilizer(y: f64, eps: f64) -> (f64, f64, f64) {
    if y < eps {
        (-y * y * y / (3.0 * eps * eps) + y * y / eps, -y * y / (eps * eps) + 2.0 * y / eps, -2.0 * y / (eps * eps) + 2.0 / eps)
    } else {
        (y - eps / 3.0, 1.0, 0.0)
    }
}

/// `μ λ f₀(‖u‖)` with `u = Tᵀ Σ wᵢ (xᵢ − xᵢⁿ)`.
pub fn friction_element(anchor: &FrictionAnchor, q: &DVector<f64>, eps: f64, order: Order) -> Element {
    let dx: Vec3 = anchor
        .points
        .iter()
        .zip(&anchor.previous)
        .zip(&anchor.weights)
        .map(|((p, x0), w)| (p.world(q) - x0) * *w)
        .sum();
    let u: Vector2<f64> = anchor.tangent.transpose() * dx;
    let y = u.norm();
    let scale = anchor.mu * anchor.normal_force;
    let (f0, f1, df1) = friction_mobilizer(y, eps);
    if order == Order::Value {
        return Element::value(scale * f0);
    }
    // d/du and d²/du² of f₀(|u|).
    let (gu, hu) = if y > 0.0 {
        let uhat = u / y;
        let ratio = f1 / y;
        (uhat * f1, Matrix2::identity() * ratio + uhat * uhat.transpose() * (df1 - ratio))
    } else {
        (Vector2::zeros(), Matrix2::identity() * (2.0 / eps))
    };
    let gx = anchor.tangent * gu;
    let hx = anchor.tangent * hu * anchor.tangent.transpose();
    let mut grad = DVector::zeros(12);
    let mut hess = DMatrix::zeros(12, 12);
    for i in 0..4 {
        grad.fixed_rows_mut::<3>(3 * i).copy_from(&(gx * anchor.weights[i] * scale));
        for j in 0..4 {
            hess.fixed_view_mut::<3, 3>(3 * i, 3 * j).copy_from(&(hx * (anchor.weights[i] * anchor.weights[j] * scale)));
        }
    }
    Element::scatter(scale * f0, &anchor.points, &grad, Some(&hess), order)
}

pub fn friction_elements(
    anchors: &[FrictionAnchor],
    q: &DVector<f64>,
    eps: f64,
    order: Order,
    exec: Execution,
) -> Vec<Element> {
    par::map(exec, anchors, |a| friction_element(a, q, eps, order))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mobilizer_is_c1() {
        let eps = 1e-5;
        let (a, da, _) = friction_mobilizer(eps * (1.0 - 1e-9), eps);
        let (b, db, _) = friction_mobilizer(eps, eps);
        assert!((a - b).abs() < 1e-12 && (da - db).abs() < 1e-8);
        assert_eq!(friction_mobilizer(0.0, eps), (0.0, 0.0, 2.0 / eps));
    }

    #[test]
    fn tangent_basis_is_orthonormal() {
        let n = Vec3::new(0.3, -0.4, 0.866).normalize();
        let t = tangent_basis(&n);
        assert!((t.transpose() * t - Matrix2::identity()).norm() < 1e-12);
        assert!((t.transpose() * n).norm() < 1e-12);
    }
}
