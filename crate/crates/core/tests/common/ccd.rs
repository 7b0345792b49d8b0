//! Continuous collision detection against a conservative bisection oracle.

use affine_ipc::geometry::{ccd_toi, edge_edge_distance_sq, point_triangle_distance_sq, CandidateKind, CcdParams, Vec3};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_vec(rng: &mut ChaCha8Rng, scale: f64) -> Vec3 {
    Vec3::new(rng.random_range(-scale..scale), rng.random_range(-scale..scale), rng.random_range(-scale..scale))
}

/// True when the stencil distance reaches zero somewhere in `[a, b]`.
/// Distances along linear trajectories are `lipschitz`-Lipschitz in time,
/// so an interval whose end distances exceed the possible drop is clear.
fn touches(dist: &impl Fn(f64) -> f64, a: f64, b: f64, lipschitz: f64, depth: usize) -> bool {
    let (da, db) = (dist(a), dist(b));
    if da <= 0.0 || db <= 0.0 {
        return true;
    }
    if da + db > lipschitz * (b - a) {
        return false;
    }
    if depth == 0 {
        return true;
    }
    let m = 0.5 * (a + b);
    touches(dist, a, m, lipschitz, depth - 1) || touches(dist, m, b, lipschitz, depth - 1)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CcdAudit {
    pub queries: usize,
    /// Queries where the oracle found contact before the returned time.
    pub violations: usize,
    /// Queries whose returned time of impact cut the step short.
    pub shortened: usize,
}

/// Random point-triangle and edge-edge sweeps, half of them aimed at each
/// other, checked against a bisection oracle.
pub fn audit(queries: usize, seed: u64) -> CcdAudit {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let params = CcdParams::default();
    let (mut violations, mut shortened) = (0, 0);
    for query in 0..queries {
        let kind = if query % 2 == 0 { CandidateKind::PointTriangle } else { CandidateKind::EdgeEdge };
        let start: [Vec3; 4] = std::array::from_fn(|_| random_vec(&mut rng, 0.5));
        // Bias the motion toward the other primitive so many queries collide.
        let pull = match kind {
            CandidateKind::PointTriangle => (start[1] + start[2] + start[3]) / 3.0 - start[0],
            CandidateKind::EdgeEdge => (start[2] + start[3] - start[0] - start[1]) * 0.5,
        };
        let scale = rng.random_range(0.0..2.5);
        let end: [Vec3; 4] = std::array::from_fn(|i| {
            let towards = if i == 0 || (kind == CandidateKind::EdgeEdge && i == 1) { pull * scale } else { Vec3::zeros() };
            start[i] + towards + random_vec(&mut rng, 0.3)
        });
        let dist = |t: f64| {
            let x: [Vec3; 4] = std::array::from_fn(|i| start[i] + (end[i] - start[i]) * t);
            match kind {
                CandidateKind::PointTriangle => point_triangle_distance_sq(&x[0], &x[1], &x[2], &x[3]).map(|d| d.dist_sq),
                CandidateKind::EdgeEdge => edge_edge_distance_sq(&x[0], &x[1], &x[2], &x[3]).map(|d| d.dist_sq),
            }
            .unwrap_or(f64::INFINITY)
            .sqrt()
        };
        if dist(0.0) < 1e-6 {
            continue;
        }
        let lipschitz: f64 = (0..4).map(|i| (end[i] - start[i]).norm()).sum::<f64>() * 2.0;
        let toi = ccd_toi(kind, &start, &end, 0.0, &params).unwrap();
        let horizon = toi.unwrap_or(1.0);
        if touches(&dist, 0.0, horizon, lipschitz, 40) {
            violations += 1;
        }
        if toi.is_some_and(|t| t < 1.0) {
            shortened += 1;
        }
    }
    CcdAudit { queries, violations, shortened }
}
