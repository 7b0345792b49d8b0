//! Geometry checked against brute-force and sampling oracles.

mod common;

use std::f64::consts::PI;

use affine_ipc::dynamics::compute_mass_properties;
use affine_ipc::geometry::shapes::{cuboid, cylinder, icosphere};
use affine_ipc::geometry::{
    broadphase, edge_edge_distance_sq, point_triangle_distance_sq, Aabb, Candidate, CandidateKind, SurfaceMesh,
    SweptMesh, Vec3,
};
use affine_ipc::par::Execution;
use nalgebra::{Rotation3, Vector3};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_vec(rng: &mut ChaCha8Rng, scale: f64) -> Vec3 {
    Vec3::new(rng.random_range(-scale..scale), rng.random_range(-scale..scale), rng.random_range(-scale..scale))
}

/// Minimum of `f` over `[0,1]²` (optionally the triangle `u + v ≤ 1`) by a
/// dense grid followed by repeated local zooming.
fn sampled_min(f: impl Fn(f64, f64) -> f64, triangle: bool) -> f64 {
    let n = 2000;
    let inside = |u: f64, v: f64| !triangle || u + v <= 1.0;
    let (mut best, mut bu, mut bv) = (f64::INFINITY, 0.0, 0.0);
    for i in 0..=n {
        for j in 0..=n {
            let (u, v) = (i as f64 / n as f64, j as f64 / n as f64);
            if inside(u, v) {
                let d = f(u, v);
                if d < best {
                    (best, bu, bv) = (d, u, v);
                }
            }
        }
    }
    let mut radius = 2.0 / n as f64;
    for _ in 0..30 {
        let (cu, cv) = (bu, bv);
        for i in -20..=20 {
            for j in -20..=20 {
                let u = (cu + radius * i as f64 / 20.0).clamp(0.0, 1.0);
                let mut v = (cv + radius * j as f64 / 20.0).clamp(0.0, 1.0);
                if triangle && u + v > 1.0 {
                    v = 1.0 - u;
                }
                let d = f(u, v);
                if d < best {
                    (best, bu, bv) = (d, u, v);
                }
            }
        }
        radius *= 0.5;
    }
    best
}

#[test]
fn point_triangle_distance_matches_sampling() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..8 {
        let [p, t0, t1, t2] = std::array::from_fn(|_| random_vec(&mut rng, 1.0));
        let exact = point_triangle_distance_sq(&p, &t0, &t1, &t2).unwrap().dist_sq.sqrt();
        let oracle = sampled_min(|u, v| (t0 + (t1 - t0) * u + (t2 - t0) * v - p).norm(), true);
        assert!((exact - oracle).abs() < 1e-6, "{exact} vs {oracle}");
    }
}

#[test]
fn edge_edge_distance_matches_sampling() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..8 {
        let [a0, a1, b0, b1] = std::array::from_fn(|_| random_vec(&mut rng, 1.0));
        let exact = edge_edge_distance_sq(&a0, &a1, &b0, &b1).unwrap().dist_sq.sqrt();
        let oracle = sampled_min(|s, t| ((a0 + (a1 - a0) * s) - (b0 + (b1 - b0) * t)).norm(), false);
        assert!((exact - oracle).abs() < 1e-6, "{exact} vs {oracle}");
    }
}

fn placed(mesh: &SurfaceMesh, rot: &Rotation3<f64>, offset: Vec3) -> Vec<Vec3> {
    mesh.vertices().iter().map(|v| rot * v + offset).collect()
}

/// Every vertex-triangle and edge-edge pair whose inflated swept boxes
/// overlap, by enumeration.
fn brute_force(meshes: &[SweptMesh<'_>], inflation: f64) -> Vec<Candidate> {
    let swept = |m: &SweptMesh<'_>, ids: &[usize]| {
        Aabb::from_points(ids.iter().flat_map(|&i| [&m.start[i], &m.end[i]])).inflate(inflation)
    };
    let mut out = Vec::new();
    for a in meshes {
        for b in meshes {
            if a.body == b.body {
                continue;
            }
            for v in 0..a.mesh.num_vertices() {
                for (t, tri) in b.mesh.triangles().iter().enumerate() {
                    if swept(a, &[v]).overlaps(&swept(b, tri)) {
                        out.push(Candidate { kind: CandidateKind::PointTriangle, body_a: a.body, prim_a: v, body_b: b.body, prim_b: t });
                    }
                }
            }
            if a.body < b.body {
                for (ea, e) in a.mesh.edges().iter().enumerate() {
                    for (eb, f) in b.mesh.edges().iter().enumerate() {
                        if swept(a, e).overlaps(&swept(b, f)) {
                            out.push(Candidate { kind: CandidateKind::EdgeEdge, body_a: a.body, prim_a: ea, body_b: b.body, prim_b: eb });
                        }
                    }
                }
            }
        }
    }
    out.sort_unstable();
    out
}

#[test]
fn broadphase_matches_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let shapes = [icosphere(0.1, 1), cuboid(Vec3::new(0.15, 0.1, 0.05)), cylinder(0.05, 0.2, 8, 0.0)];
    // A large thin slab exercises the oversized-primitive path.
    let slab = cuboid(Vec3::new(2.0, 2.0, 0.02));
    for trial in 0..6 {
        let mut positions = Vec::new();
        let mut meshes = vec![&slab];
        positions.push({
            let p = placed(&slab, &Rotation3::identity(), Vec3::new(0.0, 0.0, -0.01));
            (p.clone(), p)
        });
        for k in 0..5 {
            let mesh = &shapes[(trial + k) % shapes.len()];
            let axis = Vector3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), 1.0);
            let rot = Rotation3::new(axis.normalize() * rng.random_range(0.0..PI));
            let c = Vec3::new(rng.random_range(-0.3..0.3), rng.random_range(-0.3..0.3), rng.random_range(0.0..0.2));
            let start = placed(mesh, &rot, c);
            let end = placed(mesh, &rot, c + random_vec(&mut rng, 0.05));
            meshes.push(mesh);
            positions.push((start, end));
        }
        let swept: Vec<SweptMesh<'_>> = meshes
            .iter()
            .zip(&positions)
            .enumerate()
            .map(|(i, (m, (s, e)))| SweptMesh { body: i, mesh: m, start: s, end: e })
            .collect();
        for inflation in [0.0, 1e-3, 0.02] {
            let expected = brute_force(&swept, inflation);
            for exec in [Execution::Parallel, Execution::Sequential] {
                let got = broadphase(&swept, inflation, |_, _| true, exec);
                assert_eq!(got, expected, "trial {trial}, inflation {inflation}");
            }
        }
    }
}

#[test]
fn ccd_never_skips_a_contact() {
    let audit = common::ccd::audit(10_000, 4);
    assert_eq!(audit.violations, 0, "{audit:?}");
    assert!(audit.shortened > 1000, "{audit:?}");
}

/// Enclosed volume by the divergence theorem over signed tetrahedra.
fn tetra_volume(mesh: &SurfaceMesh) -> f64 {
    mesh.triangles()
        .iter()
        .map(|t| {
            let [a, b, c] = t.map(|i| mesh.vertices()[i]);
            a.dot(&b.cross(&c)) / 6.0
        })
        .sum()
}

#[test]
fn icosphere_volume() {
    let r: f64 = 0.3;
    let sphere = 4.0 / 3.0 * PI * r.powi(3);
    let mut previous = 0.0;
    for sub in 0..4 {
        let mesh = icosphere(r, sub);
        let props = compute_mass_properties(&mesh, 1.0).unwrap();
        assert!((props.volume - tetra_volume(&mesh)).abs() < 1e-14);
        // Inscribed polyhedra grow toward the sphere.
        assert!(props.volume > previous && props.volume < sphere);
        previous = props.volume;
    }
    assert!((previous - sphere).abs() / sphere < 0.02);
}

#[test]
fn box_mass_properties() {
    let (a, b, c) = (0.2, 0.1, 0.05);
    let density = 2700.0;
    let offset = Vec3::new(0.3, -0.1, 0.7);
    let mesh = cuboid(Vec3::new(a, b, c)).map_vertices(|v| v + offset);
    let props = compute_mass_properties(&mesh, density).unwrap();
    let m = density * a * b * c;
    assert!((props.mass - m).abs() < 1e-12 * m);
    assert!((props.first_moment - offset * m).norm() < 1e-12);
    // ∫ x xᵀ dm about the origin: box moment plus the parallel-axis term.
    let central = [a * a, b * b, c * c].map(|s| m * s / 12.0);
    for i in 0..3 {
        for j in 0..3 {
            let expected = if i == j { central[i] } else { 0.0 } + m * offset[i] * offset[j];
            assert!((props.second_moment[(i, j)] - expected).abs() < 1e-12, "({i},{j})");
        }
    }
}
