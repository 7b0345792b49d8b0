use nalgebra::{DMatrix, DVector, SMatrix};
use serde::{Deserialize, Serialize};

use super::{barrier_sq, BarrierParams, ContactError};
use crate::assembly::{body_coordinates, Element, Order, PointRef};
use crate::dynamics::AffineBody;
use crate::geometry::distance::derivatives::{distance_sq_derivatives, edge_cross_norm_sq_derivatives};
use crate::geometry::distance::{mollifier_threshold, DistanceForm};
use crate::geometry::{
    edge_edge_distance_sq, point_triangle_distance_sq, Candidate, CandidateKind, EdgeEdgeRegion, PointTriangleRegion,
    Vec3,
};
use crate::linalg::project_psd;
use crate::par::{self, Execution};

/// Bodies plus the offset of each body's coordinates in the stacked vector.
#[derive(Debug, Clone, Copy)]
pub struct ContactScene<'a> {
    pub bodies: &'a [AffineBody],
    pub offsets: &'a [Option<usize>],
}

/// World vertex positions of every body at stacked coordinates `q`.
pub fn world_positions(scene: &ContactScene<'_>, q: &DVector<f64>) -> Vec<Vec<Vec3>> {
    scene
        .bodies
        .iter()
        .zip(scene.offsets)
        .map(|(b, off)| match off {
            Some(o) => b.world_vertices_at(&body_coordinates(q, *o)),
            None => b.world_vertices(),
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PairKind {
    PointTriangle,
    EdgeEdge,
    PointEdge,
    PointPoint,
}

/// A candidate whose distance is below `d̂`, resolved to the distance
/// expression that realizes it.
#[derive(Debug, Clone, PartialEq)]
pub struct ContactPair {
    pub candidate: Candidate,
    pub kind: PairKind,
    pub distance: f64,
    /// Near-parallel weight (edge-edge only; 1 otherwise).
    pub mollifier: f64,
    pub form: DistanceForm,
    /// `[p, t0, t1, t2]` or `[a0, a1, b0, b1]`.
    pub stencil: [PointRef; 4],
    /// Stencil entries used by `form`, in its argument order.
    pub form_indices: Vec<usize>,
    /// Closest-point weights: `Σ wᵢ xᵢ` is the vector from B to A.
    pub weights: [f64; 4],
    /// Mollifier threshold from rest edge lengths (edge-edge only).
    pub eps_x: Option<f64>,
}

/// `(body, vertex)` of each stencil slot.
pub fn stencil_ids(scene: &ContactScene<'_>, c: &Candidate) -> [(usize, usize); 4] {
    let (ma, mb) = (&scene.bodies[c.body_a].mesh, &scene.bodies[c.body_b].mesh);
    match c.kind {
        CandidateKind::PointTriangle => {
            let t = mb.triangles()[c.prim_b];
            [(c.body_a, c.prim_a), (c.body_b, t[0]), (c.body_b, t[1]), (c.body_b, t[2])]
        }
        CandidateKind::EdgeEdge => {
            let (ea, eb) = (ma.edges()[c.prim_a], mb.edges()[c.prim_b]);
            [(c.body_a, ea[0]), (c.body_a, ea[1]), (c.body_b, eb[0]), (c.body_b, eb[1])]
        }
    }
}

/// Distance of one candidate at the given positions; `None` when it is not
/// closer than `dhat`.
pub fn evaluate_candidate(
    scene: &ContactScene<'_>,
    positions: &[Vec<Vec3>],
    c: &Candidate,
    dhat: f64,
) -> Result<Option<ContactPair>, ContactError> {
    let ids = stencil_ids(scene, c);
    let x: [Vec3; 4] = ids.map(|(b, v)| positions[b][v]);
    let stencil = ids.map(|(b, v)| PointRef::point(scene.offsets[b], scene.bodies[b].mesh.vertices()[v]));
    let (dist_sq, kind, form, form_indices, weights, eps_x) = match c.kind {
        CandidateKind::PointTriangle => {
            let Ok(r) = point_triangle_distance_sq(&x[0], &x[1], &x[2], &x[3]) else {
                // Degenerate triangles are covered by their edges' edge-edge candidates.
                return Ok(None);
            };
            let [b0, b1, b2] = r.barycentric;
            let (kind, form, idx) = match r.region {
                PointTriangleRegion::Face => (PairKind::PointTriangle, DistanceForm::PointPlane, vec![0, 1, 2, 3]),
                PointTriangleRegion::Edge(k) => {
                    (PairKind::PointEdge, DistanceForm::PointLine, vec![0, 1 + k, 1 + (k + 1) % 3])
                }
                PointTriangleRegion::Vertex(k) => (PairKind::PointPoint, DistanceForm::PointPoint, vec![0, 1 + k]),
            };
            (r.dist_sq, kind, form, idx, [1.0, -b0, -b1, -b2], None)
        }
        CandidateKind::EdgeEdge => {
            let Ok(r) = edge_edge_distance_sq(&x[0], &x[1], &x[2], &x[3]) else {
                return Ok(None);
            };
            let (kind, form, idx) = match r.region {
                EdgeEdgeRegion::Interior => (PairKind::EdgeEdge, DistanceForm::LineLine, vec![0, 1, 2, 3]),
                EdgeEdgeRegion::PointEdge { from_a: true, endpoint } => {
                    (PairKind::PointEdge, DistanceForm::PointLine, vec![endpoint, 2, 3])
                }
                EdgeEdgeRegion::PointEdge { from_a: false, endpoint } => {
                    (PairKind::PointEdge, DistanceForm::PointLine, vec![2 + endpoint, 0, 1])
                }
                EdgeEdgeRegion::PointPoint { a, b } => (PairKind::PointPoint, DistanceForm::PointPoint, vec![a, 2 + b]),
            };
            let rest = |k: usize| (stencil[k + 1].rest - stencil[k].rest).norm_squared();
            let eps = mollifier_threshold(rest(0), rest(2));
            let (s, t) = (r.s, r.t);
            (r.dist_sq, kind, form, idx, [1.0 - s, s, t - 1.0, -t], Some(eps))
        }
    };
    if dist_sq <= 0.0 {
        return Err(ContactError::Interpenetration { candidate: *c, distance: 0.0 });
    }
    let distance = dist_sq.sqrt();
    if distance >= dhat {
        return Ok(None);
    }
    let mollifier = match eps_x {
        Some(eps) => crate::geometry::distance::edge_edge_mollifier(&x[0], &x[1], &x[2], &x[3], eps),
        None => 1.0,
    };
    Ok(Some(ContactPair {
        candidate: *c,
        kind,
        distance,
        mollifier,
        form,
        stencil,
        form_indices,
        weights,
        eps_x,
    }))
}

/// Pairs among `candidates` closer than `dhat`, in candidate order.
pub fn active_pairs(
    scene: &ContactScene<'_>,
    positions: &[Vec<Vec3>],
    candidates: &[Candidate],
    dhat: f64,
    exec: Execution,
) -> Result<Vec<ContactPair>, ContactError> {
    par::map(exec, candidates, |c| evaluate_candidate(scene, positions, c, dhat))
        .into_iter()
        .filter_map(Result::transpose)
        .collect()
}

type Mat12 = SMatrix<f64, 12, 12>;

/// `κ m b(d)` for one pair, differentiated over its four stencil points.
pub fn barrier_element(
    pair: &ContactPair,
    positions: &[Vec<Vec3>],
    scene: &ContactScene<'_>,
    params: &BarrierParams,
    order: Order,
) -> Result<Element, ContactError> {
    let ids = stencil_ids(scene, &pair.candidate);
    let x: [Vec3; 4] = ids.map(|(b, v)| positions[b][v]);
    let sub: Vec<Vec3> = pair.form_indices.iter().map(|&i| x[i]).collect();
    let kappa = params.kappa;

    if order == Order::Value {
        let s = crate::geometry::distance::derivatives::distance_sq_value(pair.form, &sub);
        let (b, _, _) = barrier_sq(s, params.dhat)?;
        return Ok(Element::value(kappa * pair.mollifier * b));
    }

    let (s, gs_sub, hs_sub) = distance_sq_derivatives(pair.form, &sub);
    let (b, bs, bss) = barrier_sq(s, params.dhat)?;
    // Lift form derivatives to the 12 stencil coordinates.
    let mut gs = DVector::<f64>::zeros(12);
    let mut hs = DMatrix::<f64>::zeros(12, 12);
    for (a, &ia) in pair.form_indices.iter().enumerate() {
        for r in 0..3 {
            gs[3 * ia + r] = gs_sub[3 * a + r];
            for (bb, &ib) in pair.form_indices.iter().enumerate() {
                for c in 0..3 {
                    hs[(3 * ia + r, 3 * ib + c)] = hs_sub[(3 * a + r, 3 * bb + c)];
                }
            }
        }
    }
    let mut energy = b;
    let mut grad = &gs * bs;
    let mut hess = &gs * gs.transpose() * bss + &hs * bs;

    if let Some(eps) = pair.eps_x.filter(|_| pair.mollifier < 1.0) {
        let (c, gc, hc) = edge_cross_norm_sq_derivatives(&x);
        let m = (2.0 - c / eps) * c / eps;
        let mc = (2.0 - 2.0 * c / eps) / eps;
        let mcc = -2.0 / (eps * eps);
        let gm = &gc * mc;
        let hm = &gc * gc.transpose() * mcc + &hc * mc;
        hess = &hess * m + &hm * b + &gm * grad.transpose() + &grad * gm.transpose();
        grad = &grad * m + &gm * b;
        energy *= m;
    }
    let energy = kappa * energy;
    let grad = grad * kappa;
    let hess = if order == Order::Hessian {
        let h = Mat12::from_column_slice((hess * kappa).as_slice());
        Some(DMatrix::from_column_slice(12, 12, project_psd(&h).as_slice()))
    } else {
        None
    };
    Ok(Element::scatter(energy, &pair.stencil, &grad, hess.as_ref(), order))
}

/// Contact elements for all active candidates plus the smallest candidate
/// distance seen (infinity when nothing is within `d̂`).
pub fn contact_elements(
    scene: &ContactScene<'_>,
    q: &DVector<f64>,
    candidates: &[Candidate],
    params: &BarrierParams,
    order: Order,
    exec: Execution,
) -> Result<(Vec<Element>, f64), ContactError> {
    let positions = world_positions(scene, q);
    let pairs = active_pairs(scene, &positions, candidates, params.dhat, exec)?;
    let min_d = pairs.iter().map(|p| p.distance).fold(f64::INFINITY, f64::min);
    let elements = par::map(exec, &pairs, |p| barrier_element(p, &positions, scene, params, order))
        .into_iter()
        .collect::<Result<Vec<_>, _>>()?;
    Ok((elements, min_d))
}
