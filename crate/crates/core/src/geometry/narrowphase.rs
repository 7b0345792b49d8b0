//! Brute-force all-pairs queries. Quadratic; used for load-time checks and
//! as a test oracle for the broadphase-driven solver path.

use super::distance::{edge_edge_distance_sq_robust, point_triangle_distance_sq_robust, segment_intersects_triangle};
use super::broadphase::Aabb;
use crate::par::{self, Execution};
use super::{SurfaceMesh, Vec3};

#[derive(Debug, Clone, Copy)]
pub struct PlacedMesh<'a> {
    pub body: usize,
    pub mesh: &'a SurfaceMesh,
    pub vertices: &'a [Vec3],
}

fn boxes<const N: usize>(vertices: &[Vec3], prims: &[[usize; N]]) -> Vec<Aabb> {
    prims.iter().map(|p| Aabb::from_points(p.iter().map(|&i| &vertices[i]))).collect()
}

/// Smallest vertex-triangle / edge-edge distance between two surfaces.
/// Primitive pairs whose boxes are farther apart than the best distance so
/// far are skipped, which does not change the result.
pub fn mesh_pair_distance(a: &PlacedMesh<'_>, b: &PlacedMesh<'_>) -> f64 {
    let mut best = f64::INFINITY;
    for (p, q) in [(a, b), (b, a)] {
        let tri_boxes = boxes(q.vertices, q.mesh.triangles());
        for v in p.vertices {
            let vb = Aabb::from_points([v]);
            for (t, tb) in q.mesh.triangles().iter().zip(&tri_boxes) {
                if vb.distance_sq(tb) >= best {
                    continue;
                }
                let [t0, t1, t2] = t.map(|i| q.vertices[i]);
                best = best.min(point_triangle_distance_sq_robust(v, &t0, &t1, &t2));
            }
        }
    }
    let eb_boxes = boxes(b.vertices, b.mesh.edges());
    for ea in a.mesh.edges() {
        let ab = Aabb::from_points([&a.vertices[ea[0]], &a.vertices[ea[1]]]);
        for (eb, bb) in b.mesh.edges().iter().zip(&eb_boxes) {
            if ab.distance_sq(bb) >= best {
                continue;
            }
            best = best.min(edge_edge_distance_sq_robust(
                &a.vertices[ea[0]],
                &a.vertices[ea[1]],
                &b.vertices[eb[0]],
                &b.vertices[eb[1]],
            ));
        }
    }
    best.sqrt()
}

/// True when some edge of one surface pierces a triangle of the other.
pub fn meshes_intersect(a: &PlacedMesh<'_>, b: &PlacedMesh<'_>) -> bool {
    if !Aabb::from_points(a.vertices).overlaps(&Aabb::from_points(b.vertices)) {
        return false;
    }
    [(a, b), (b, a)].iter().any(|(p, q)| {
        let tri_boxes = boxes(q.vertices, q.mesh.triangles());
        p.mesh.edges().iter().any(|e| {
            let (e0, e1) = (&p.vertices[e[0]], &p.vertices[e[1]]);
            let eb = Aabb::from_points([e0, e1]);
            q.mesh.triangles().iter().zip(&tri_boxes).any(|(t, tb)| {
                if !eb.overlaps(tb) {
                    return false;
                }
                let [t0, t1, t2] = t.map(|i| q.vertices[i]);
                segment_intersects_triangle(e0, e1, &t0, &t1, &t2)
            })
        })
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairDistance {
    pub body_a: usize,
    pub body_b: usize,
    pub distance: f64,
    pub intersecting: bool,
}

/// Distance and intersection status of every allowed body pair.
pub fn all_pairs(meshes: &[PlacedMesh<'_>], allow: impl Fn(usize, usize) -> bool) -> Vec<PairDistance> {
    let mut pairs = Vec::new();
    for (i, a) in meshes.iter().enumerate() {
        for b in &meshes[i + 1..] {
            if a.body != b.body && allow(a.body, b.body) {
                pairs.push((a, b));
            }
        }
    }
    par::map(Execution::Parallel, &pairs, |(a, b)| PairDistance {
        body_a: a.body,
        body_b: b.body,
        distance: mesh_pair_distance(a, b),
        intersecting: meshes_intersect(a, b),
    })
}

/// Minimum over all allowed pairs; infinity when there are none.
pub fn min_distance(meshes: &[PlacedMesh<'_>], allow: impl Fn(usize, usize) -> bool) -> f64 {
    all_pairs(meshes, allow).iter().map(|p| p.distance).fold(f64::INFINITY, f64::min)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::shapes::cuboid;

    #[test]
    fn separated_and_overlapping_cubes() {
        let cube = cuboid(Vec3::new(1.0, 1.0, 1.0));
        let a: Vec<Vec3> = cube.vertices().to_vec();
        let b: Vec<Vec3> = cube.vertices().iter().map(|v| v + Vec3::new(1.5, 0.0, 0.0)).collect();
        let c: Vec<Vec3> = cube.vertices().iter().map(|v| v + Vec3::new(0.5, 0.3, 0.2)).collect();
        let pa = PlacedMesh { body: 0, mesh: &cube, vertices: &a };
        let pb = PlacedMesh { body: 1, mesh: &cube, vertices: &b };
        let pc = PlacedMesh { body: 2, mesh: &cube, vertices: &c };
        assert!((mesh_pair_distance(&pa, &pb) - 0.5).abs() < 1e-12);
        assert!(!meshes_intersect(&pa, &pb));
        assert!(meshes_intersect(&pa, &pc));
        assert_eq!(all_pairs(&[pa, pb, pc], |_, _| true).len(), 3);
    }
}
