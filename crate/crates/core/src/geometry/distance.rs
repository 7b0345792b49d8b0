//! Unsigned squared distances between mesh primitives.
//!
//! Values are computed with the closed-form expression of the region that
//! attains the minimum (point-plane, point-line, line-line or point-point),
//! which is also what [`derivatives`] differentiates, so value, gradient and
//! Hessian always describe the same function.

use std::cmp::Ordering;

use num_dual::{Dual2SVec64, DualNum};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{Vec3, DEGENERATE_EPS};

#[derive(Debug, Error, Clone, Copy, PartialEq)]
pub enum DistanceError {
    #[error("triangle is degenerate (area below threshold)")]
    DegenerateTriangle,
    #[error("segment has zero length")]
    DegenerateSegment,
}

/// Which feature of the triangle is closest to the query point.
/// Edge `k` joins triangle vertices `k` and `(k + 1) % 3`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PointTriangleRegion {
    Face,
    Edge(usize),
    Vertex(usize),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointTriangleDistance {
    pub dist_sq: f64,
    pub region: PointTriangleRegion,
    /// Barycentric coordinates of the closest point on the triangle.
    pub barycentric: [f64; 3],
}

/// Which features realize an edge-edge distance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EdgeEdgeRegion {
    /// Both closest points are interior to their segments.
    Interior,
    /// Endpoint `endpoint` of edge A (`from_a`) or edge B against the other edge.
    PointEdge { from_a: bool, endpoint: usize },
    PointPoint { a: usize, b: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdgeEdgeDistance {
    pub dist_sq: f64,
    pub region: EdgeEdgeRegion,
    /// Closest point parameters: a0 + s (a1 - a0) and b0 + t (b1 - b0).
    pub s: f64,
    pub t: f64,
    /// Near-parallel downweighting with the threshold taken from the current
    /// edge lengths; contact uses rest lengths via [`edge_edge_mollifier`].
    pub mollifier: f64,
}

/// Mollifier threshold for an edge pair from rest edge lengths.
pub fn mollifier_threshold(rest_len_sq_a: f64, rest_len_sq_b: f64) -> f64 {
    1e-3 * rest_len_sq_a * rest_len_sq_b
}

/// Squared norm of the cross product of the two edge directions.
pub fn edge_cross_norm_sq(a0: &Vec3, a1: &Vec3, b0: &Vec3, b1: &Vec3) -> f64 {
    (a1 - a0).cross(&(b1 - b0)).norm_squared()
}

/// Smooth weight `m(c) = -c²/ε² + 2c/ε` below `ε`, 1 above, with `c` the
/// squared cross-product norm. Vanishes quadratically in the angle.
pub fn edge_edge_mollifier(a0: &Vec3, a1: &Vec3, b0: &Vec3, b1: &Vec3, eps_x: f64) -> f64 {
    let c = edge_cross_norm_sq(a0, a1, b0, b1);
    mollifier_of(c, eps_x)
}

pub(crate) fn mollifier_of(c: f64, eps_x: f64) -> f64 {
    if c < eps_x {
        let r = c / eps_x;
        (2.0 - r) * r
    } else {
        1.0
    }
}

pub fn point_point_distance_sq(p: &Vec3, q: &Vec3) -> f64 {
    (p - q).norm_squared()
}

/// Distance from `p` to the infinite line through `e0`, `e1`.
pub fn point_line_distance_sq(p: &Vec3, e0: &Vec3, e1: &Vec3) -> f64 {
    (e0 - p).cross(&(e1 - p)).norm_squared() / (e1 - e0).norm_squared()
}

pub fn point_plane_distance_sq(p: &Vec3, t0: &Vec3, t1: &Vec3, t2: &Vec3) -> f64 {
    let n = (t1 - t0).cross(&(t2 - t0));
    let d = (p - t0).dot(&n);
    d * d / n.norm_squared()
}

pub fn line_line_distance_sq(a0: &Vec3, a1: &Vec3, b0: &Vec3, b1: &Vec3) -> f64 {
    let n = (a1 - a0).cross(&(b1 - b0));
    let d = (b0 - a0).dot(&n);
    d * d / n.norm_squared()
}

/// Point to closed segment. Returns the squared distance and the segment
/// parameter of the closest point.
pub fn point_edge_distance_sq(p: &Vec3, e0: &Vec3, e1: &Vec3) -> Result<(f64, f64), DistanceError> {
    let e = e1 - e0;
    let len_sq = e.norm_squared();
    if len_sq < DEGENERATE_EPS {
        return Err(DistanceError::DegenerateSegment);
    }
    let s = (p - e0).dot(&e) / len_sq;
    Ok(if s <= 0.0 {
        (point_point_distance_sq(p, e0), 0.0)
    } else if s >= 1.0 {
        (point_point_distance_sq(p, e1), 1.0)
    } else {
        (point_line_distance_sq(p, e0, e1), s)
    })
}

/// Squared distance from `p` to the closed triangle `(t0, t1, t2)`.
pub fn point_triangle_distance_sq(
    p: &Vec3,
    t0: &Vec3,
    t1: &Vec3,
    t2: &Vec3,
) -> Result<PointTriangleDistance, DistanceError> {
    let ab = t1 - t0;
    let ac = t2 - t0;
    if 0.5 * ab.cross(&ac).norm() < DEGENERATE_EPS {
        return Err(DistanceError::DegenerateTriangle);
    }
    let (mut region, mut barycentric) = closest_triangle_feature(p, t0, t1, t2);
    if region != PointTriangleRegion::Face {
        // A point off the plane whose projection lands on the triangle
        // boundary is attributed to the face.
        if let Some(bary) = plane_projection_barycentric(p, t0, t1, t2) {
            region = PointTriangleRegion::Face;
            barycentric = bary;
        }
    }
    let t = [t0, t1, t2];
    let dist_sq = match region {
        PointTriangleRegion::Face => point_plane_distance_sq(p, t0, t1, t2),
        PointTriangleRegion::Edge(k) => point_line_distance_sq(p, t[k], t[(k + 1) % 3]),
        PointTriangleRegion::Vertex(k) => point_point_distance_sq(p, t[k]),
    };
    Ok(PointTriangleDistance { dist_sq, region, barycentric })
}

fn plane_projection_barycentric(p: &Vec3, a: &Vec3, b: &Vec3, c: &Vec3) -> Option<[f64; 3]> {
    let n = (b - a).cross(&(c - a));
    if (p - a).dot(&n) == 0.0 {
        return None;
    }
    let n2 = n.norm_squared();
    let u = (c - b).cross(&(p - b)).dot(&n) / n2;
    let v = (a - c).cross(&(p - c)).dot(&n) / n2;
    let w = 1.0 - u - v;
    (u >= 0.0 && v >= 0.0 && w >= 0.0).then_some([u, v, w])
}

// Voronoi-region walk (Ericson, Real-Time Collision Detection, 5.1.5).
fn closest_triangle_feature(p: &Vec3, a: &Vec3, b: &Vec3, c: &Vec3) -> (PointTriangleRegion, [f64; 3]) {
    use PointTriangleRegion::*;
    let ab = b - a;
    let ac = c - a;
    let ap = p - a;
    let d1 = ab.dot(&ap);
    let d2 = ac.dot(&ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return (Vertex(0), [1.0, 0.0, 0.0]);
    }
    let bp = p - b;
    let d3 = ab.dot(&bp);
    let d4 = ac.dot(&bp);
    if d3 >= 0.0 && d4 <= d3 {
        return (Vertex(1), [0.0, 1.0, 0.0]);
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        let v = d1 / (d1 - d3);
        return (Edge(0), [1.0 - v, v, 0.0]);
    }
    let cp = p - c;
    let d5 = ab.dot(&cp);
    let d6 = ac.dot(&cp);
    if d6 >= 0.0 && d5 <= d6 {
        return (Vertex(2), [0.0, 0.0, 1.0]);
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        let w = d2 / (d2 - d6);
        return (Edge(2), [1.0 - w, 0.0, w]);
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        let w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return (Edge(1), [0.0, 1.0 - w, w]);
    }
    let denom = 1.0 / (va + vb + vc);
    let v = vb * denom;
    let w = vc * denom;
    (Face, [1.0 - v - w, v, w])
}

/// Squared distance between closed segments `a0a1` and `b0b1`.
///
/// Symmetric bit-for-bit: arguments are put in a canonical order before the
/// computation and the result is mapped back.
pub fn edge_edge_distance_sq(a0: &Vec3, a1: &Vec3, b0: &Vec3, b1: &Vec3) -> Result<EdgeEdgeDistance, DistanceError> {
    if lexicographic(a0, a1, b0, b1) == Ordering::Greater {
        let swapped = edge_edge_ordered(b0, b1, a0, a1)?;
        let region = match swapped.region {
            EdgeEdgeRegion::Interior => EdgeEdgeRegion::Interior,
            EdgeEdgeRegion::PointEdge { from_a, endpoint } => EdgeEdgeRegion::PointEdge { from_a: !from_a, endpoint },
            EdgeEdgeRegion::PointPoint { a, b } => EdgeEdgeRegion::PointPoint { a: b, b: a },
        };
        return Ok(EdgeEdgeDistance { region, s: swapped.t, t: swapped.s, ..swapped });
    }
    edge_edge_ordered(a0, a1, b0, b1)
}

fn lexicographic(a0: &Vec3, a1: &Vec3, b0: &Vec3, b1: &Vec3) -> Ordering {
    a0.iter()
        .chain(a1.iter())
        .zip(b0.iter().chain(b1.iter()))
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| *o != Ordering::Equal)
        .unwrap_or(Ordering::Equal)
}

/// Relative squared-sine threshold below which edges count as parallel.
const PARALLEL_SIN_SQ: f64 = 1e-10;

fn edge_edge_ordered(a0: &Vec3, a1: &Vec3, b0: &Vec3, b1: &Vec3) -> Result<EdgeEdgeDistance, DistanceError> {
    let d1 = a1 - a0;
    let d2 = b1 - b0;
    let r = a0 - b0;
    let a = d1.norm_squared();
    let e = d2.norm_squared();
    if a < DEGENERATE_EPS || e < DEGENERATE_EPS {
        return Err(DistanceError::DegenerateSegment);
    }
    let b = d1.dot(&d2);
    let c = d1.dot(&r);
    let f = d2.dot(&r);
    let denom = a * e - b * b;
    let parallel = denom <= PARALLEL_SIN_SQ * a * e;

    // Ericson 5.1.9, closest points of two segments.
    let mut s = if parallel { 0.0 } else { ((b * f - c * e) / denom).clamp(0.0, 1.0) };
    let mut t = (b * s + f) / e;
    if t < 0.0 {
        t = 0.0;
        s = (-c / a).clamp(0.0, 1.0);
    } else if t > 1.0 {
        t = 1.0;
        s = ((b - c) / a).clamp(0.0, 1.0);
    }

    let s_end = end_index(s);
    let t_end = end_index(t);
    let ends_a = [a0, a1];
    let ends_b = [b0, b1];
    let (region, dist_sq) = match (s_end, t_end) {
        (None, None) => (EdgeEdgeRegion::Interior, line_line_distance_sq(a0, a1, b0, b1)),
        (Some(i), None) => (
            EdgeEdgeRegion::PointEdge { from_a: true, endpoint: i },
            point_line_distance_sq(ends_a[i], b0, b1),
        ),
        (None, Some(j)) => (
            EdgeEdgeRegion::PointEdge { from_a: false, endpoint: j },
            point_line_distance_sq(ends_b[j], a0, a1),
        ),
        (Some(i), Some(j)) => (
            EdgeEdgeRegion::PointPoint { a: i, b: j },
            point_point_distance_sq(ends_a[i], ends_b[j]),
        ),
    };
    let mollifier = mollifier_of(denom, mollifier_threshold(a, e));
    Ok(EdgeEdgeDistance { dist_sq, region, s, t, mollifier })
}

fn end_index(u: f64) -> Option<usize> {
    if u <= 0.0 {
        Some(0)
    } else if u >= 1.0 {
        Some(1)
    } else {
        None
    }
}

/// Robust closed point-triangle distance; degenerate triangles fall back to
/// the minimum over their non-degenerate edges.
pub fn point_triangle_distance_sq_robust(p: &Vec3, t0: &Vec3, t1: &Vec3, t2: &Vec3) -> f64 {
    match point_triangle_distance_sq(p, t0, t1, t2) {
        Ok(d) => d.dist_sq,
        Err(_) => {
            let t = [t0, t1, t2];
            (0..3)
                .map(|k| match point_edge_distance_sq(p, t[k], t[(k + 1) % 3]) {
                    Ok((d, _)) => d,
                    Err(_) => point_point_distance_sq(p, t[k]),
                })
                .fold(f64::INFINITY, f64::min)
        }
    }
}

/// Robust closed segment-segment distance; zero-length segments degrade to
/// point-edge or point-point.
pub fn edge_edge_distance_sq_robust(a0: &Vec3, a1: &Vec3, b0: &Vec3, b1: &Vec3) -> f64 {
    match edge_edge_distance_sq(a0, a1, b0, b1) {
        Ok(d) => d.dist_sq,
        Err(_) => {
            let pe = |p: &Vec3, e0: &Vec3, e1: &Vec3| match point_edge_distance_sq(p, e0, e1) {
                Ok((d, _)) => d,
                Err(_) => point_point_distance_sq(p, e0),
            };
            pe(a0, b0, b1).min(pe(a1, b0, b1)).min(pe(b0, a0, a1)).min(pe(b1, a0, a1))
        }
    }
}

/// Whether the closed segment `e0e1` crosses or touches the triangle.
/// Used to detect interpenetration that primitive distances cannot see
/// (an edge piercing a face while all distances stay positive).
pub fn segment_intersects_triangle(e0: &Vec3, e1: &Vec3, t0: &Vec3, t1: &Vec3, t2: &Vec3) -> bool {
    let n = (t1 - t0).cross(&(t2 - t0));
    let s0 = (e0 - t0).dot(&n);
    let s1 = (e1 - t0).dot(&n);
    if (s0 > 0.0 && s1 > 0.0) || (s0 < 0.0 && s1 < 0.0) || s0 == s1 {
        return false;
    }
    let u = s0 / (s0 - s1);
    let x = e0 + (e1 - e0) * u;
    let inside = |a: &Vec3, b: &Vec3| (b - a).cross(&(x - a)).dot(&n) >= 0.0;
    inside(t0, t1) && inside(t1, t2) && inside(t2, t0)
}

/// The distance expression that is actually differentiated for a pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DistanceForm {
    /// Stencil `[p, q]`.
    PointPoint,
    /// Stencil `[p, e0, e1]`, distance to the supporting line.
    PointLine,
    /// Stencil `[p, t0, t1, t2]`, distance to the supporting plane.
    PointPlane,
    /// Stencil `[a0, a1, b0, b1]`, distance between supporting lines.
    LineLine,
}

impl DistanceForm {
    pub fn stencil_len(self) -> usize {
        match self {
            DistanceForm::PointPoint => 2,
            DistanceForm::PointLine => 3,
            DistanceForm::PointPlane | DistanceForm::LineLine => 4,
        }
    }
}

/// Gradients and Hessians of the closed-form squared distances with respect
/// to the stacked stencil coordinates, by forward-mode second-order duals.
pub mod derivatives {
    use nalgebra::{DMatrix, DVector, SMatrix, SVector};

    use super::*;

    type V3<T> = [T; 3];

    fn sub<T: DualNum + Copy>(a: V3<T>, b: V3<T>) -> V3<T> {
        [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
    }

    fn dot<T: DualNum + Copy>(a: V3<T>, b: V3<T>) -> T {
        a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
    }

    fn cross<T: DualNum + Copy>(a: V3<T>, b: V3<T>) -> V3<T> {
        [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
    }

    fn point<T: Copy, const N: usize>(x: &SVector<T, N>, k: usize) -> V3<T> {
        [x[3 * k], x[3 * k + 1], x[3 * k + 2]]
    }

    fn pp<T: DualNum + Copy, const N: usize>(x: &SVector<T, N>) -> T {
        let d = sub(point(x, 0), point(x, 1));
        dot(d, d)
    }

    fn pl<T: DualNum + Copy, const N: usize>(x: &SVector<T, N>) -> T {
        let (p, e0, e1) = (point(x, 0), point(x, 1), point(x, 2));
        let c = cross(sub(e0, p), sub(e1, p));
        let e = sub(e1, e0);
        dot(c, c) / dot(e, e)
    }

    fn pt<T: DualNum + Copy, const N: usize>(x: &SVector<T, N>) -> T {
        let (p, t0, t1, t2) = (point(x, 0), point(x, 1), point(x, 2), point(x, 3));
        let n = cross(sub(t1, t0), sub(t2, t0));
        let d = dot(sub(p, t0), n);
        d * d / dot(n, n)
    }

    fn ll<T: DualNum + Copy, const N: usize>(x: &SVector<T, N>) -> T {
        let (a0, a1, b0, b1) = (point(x, 0), point(x, 1), point(x, 2), point(x, 3));
        let n = cross(sub(a1, a0), sub(b1, b0));
        let d = dot(sub(b0, a0), n);
        d * d / dot(n, n)
    }

    fn run<const N: usize>(
        points: &[Vec3],
        f: impl Fn(&SVector<Dual2SVec64<N>, N>) -> Dual2SVec64<N>,
    ) -> (f64, DVector<f64>, DMatrix<f64>) {
        let x = SVector::<f64, N>::from_iterator(points.iter().flat_map(|p| [p.x, p.y, p.z]));
        let (v, g, h): (f64, SVector<f64, N>, SMatrix<f64, N, N>) = num_dual::hessian(|x| f(&x), &x);
        (v, DVector::from_column_slice(g.as_slice()), DMatrix::from_column_slice(N, N, h.as_slice()))
    }

    /// Value, gradient and Hessian of the squared distance for `form`,
    /// evaluated at the stacked stencil `points`.
    pub fn distance_sq_derivatives(form: DistanceForm, points: &[Vec3]) -> (f64, DVector<f64>, DMatrix<f64>) {
        assert_eq!(points.len(), form.stencil_len());
        match form {
            DistanceForm::PointPoint => run::<6>(points, pp),
            DistanceForm::PointLine => run::<9>(points, pl),
            DistanceForm::PointPlane => run::<12>(points, pt),
            DistanceForm::LineLine => run::<12>(points, ll),
        }
    }

    /// Value of the same closed form, without derivatives.
    pub fn distance_sq_value(form: DistanceForm, points: &[Vec3]) -> f64 {
        match form {
            DistanceForm::PointPoint => point_point_distance_sq(&points[0], &points[1]),
            DistanceForm::PointLine => point_line_distance_sq(&points[0], &points[1], &points[2]),
            DistanceForm::PointPlane => point_plane_distance_sq(&points[0], &points[1], &points[2], &points[3]),
            DistanceForm::LineLine => line_line_distance_sq(&points[0], &points[1], &points[2], &points[3]),
        }
    }

    /// Squared cross-product norm of two edges with its gradient and Hessian
    /// over `[a0, a1, b0, b1]`.
    pub fn edge_cross_norm_sq_derivatives(points: &[Vec3]) -> (f64, DVector<f64>, DMatrix<f64>) {
        run::<12>(points, |x| {
            let c = cross(sub(point(x, 1), point(x, 0)), sub(point(x, 3), point(x, 2)));
            dot(c, c)
        })
    }
}
