//! Finite-difference audits of the energy terms; each returns the worst
//! relative gradient (or Hessian) error over its random states.

use affine_ipc::articulation::{
    lateral_penalty_elements, limit_elements, limit_margins, motor_elements, JointKind, JointSpec, ResolvedMotor,
};
use affine_ipc::assembly::{Element, Order};
use affine_ipc::contact::{
    active_pairs, build_anchors, contact_elements, friction_elements, world_positions, BarrierParams, ContactScene,
};
use affine_ipc::dynamics::{inertia_energy, orthogonality_energy, AffineBody, Vec12};
use affine_ipc::geometry::shapes::cuboid;
use affine_ipc::geometry::{broadphase, Candidate, SweptMesh, Vec3};
use affine_ipc::par::Execution;
use affine_ipc::solver::{IncrementalPotential, SolverParams, StepData, World};
use nalgebra::{DMatrix, DVector, Matrix3, Rotation3};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const STATES: usize = 100;
pub const TOLERANCE: f64 = 1e-4;

fn assemble(elements: &[Element], n: usize) -> (f64, DVector<f64>, DMatrix<f64>) {
    let mut g = DVector::zeros(n);
    let mut h = DMatrix::zeros(n, n);
    let mut e = 0.0;
    for el in elements {
        e += el.energy;
        for (i, &di) in el.dofs.iter().enumerate() {
            g[di] += el.grad[i];
            if el.hess.nrows() > 0 {
                for (j, &dj) in el.dofs.iter().enumerate() {
                    h[(di, dj)] += el.hess[(i, j)];
                }
            }
        }
    }
    (e, g, h)
}

fn relative(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    (a - b).norm() / b.norm().max(1e-12)
}

fn fd_gradient(f: &impl Fn(&DVector<f64>) -> f64, q: &DVector<f64>, step: f64) -> DVector<f64> {
    DVector::from_fn(q.len(), |i, _| {
        let (mut a, mut b) = (q.clone(), q.clone());
        a[i] += step;
        b[i] -= step;
        (f(&a) - f(&b)) / (2.0 * step)
    })
}

fn fd_hessian(g: &impl Fn(&DVector<f64>) -> DVector<f64>, q: &DVector<f64>, step: f64) -> DMatrix<f64> {
    let n = q.len();
    let mut h = DMatrix::zeros(n, n);
    for i in 0..n {
        let (mut a, mut b) = (q.clone(), q.clone());
        a[i] += step;
        b[i] -= step;
        h.set_column(i, &((g(&a) - g(&b)) / (2.0 * step)));
    }
    h
}

/// Checks the assembled gradient of `elements` (and, when `exact_hessian`,
/// the Hessian) at `q`; returns the worst relative errors.
fn check(
    elements: impl Fn(&DVector<f64>, Order) -> Vec<Element>,
    q: &DVector<f64>,
    step: f64,
    exact_hessian: bool,
) -> (f64, f64) {
    let n = q.len();
    let energy = |x: &DVector<f64>| assemble(&elements(x, Order::Value), n).0;
    let gradient = |x: &DVector<f64>| assemble(&elements(x, Order::Gradient), n).1;
    let (_, g, h) = assemble(&elements(q, Order::Hessian), n);
    assert!((&h - h.transpose()).norm() <= 1e-9 * h.norm().max(1.0), "Hessian not symmetric");
    let g_err = relative(&fd_gradient(&energy, q, step), &g);
    let h_err = if exact_hessian {
        let fd = fd_hessian(&gradient, q, step);
        (&fd - &h).norm() / h.norm().max(1e-12)
    } else {
        0.0
    };
    (g_err, h_err)
}

fn random_body_q(rng: &mut ChaCha8Rng, deform: f64) -> Vec12 {
    let p = Vec3::new(rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5));
    let axis = Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
    let a = Rotation3::new(axis).matrix() + Matrix3::from_fn(|_, _| rng.random_range(-deform..deform));
    let mut q = Vec12::zeros();
    q.fixed_rows_mut::<3>(0).copy_from(&p);
    for r in 0..3 {
        for c in 0..3 {
            q[3 + 3 * r + c] = a[(r, c)];
        }
    }
    q
}

fn body_elements(f: impl Fn(&Vec12) -> (f64, Vec12, Option<nalgebra::SMatrix<f64, 12, 12>>)) -> impl Fn(&DVector<f64>, Order) -> Vec<Element> {
    move |x, order| {
        let qb = Vec12::from_column_slice(x.as_slice());
        let (e, g, h) = f(&qb);
        vec![Element::body(0, e, &g, h.as_ref(), order)]
    }
}

pub fn inertia() -> f64 {
    let mut worst: f64 = 0.0;
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let body = AffineBody::dynamic("b", &cuboid(Vec3::new(0.2, 0.1, 0.05)), 800.0, 0.0).unwrap();
    let mass = body.generalized_mass();
    for _ in 0..STATES {
        let q_tilde = random_body_q(&mut rng, 0.1);
        let q = DVector::from_column_slice(random_body_q(&mut rng, 0.1).as_slice());
        let (g, h) = check(body_elements(|x| {
            let (e, g, h) = inertia_energy(x, &q_tilde, &mass);
            (e, g, Some(h))
        }), &q, 1e-6, true);
        worst = worst.max(g).max(h);
    }
    worst
}

pub fn orthogonality() -> f64 {
    let mut worst: f64 = 0.0;
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..STATES {
        let q = DVector::from_column_slice(random_body_q(&mut rng, 0.2).as_slice());
        let (g, h) = check(body_elements(|x| {
            let (e, g, h) = orthogonality_energy(x, 1e5, 1e-3, false);
            (e, g, Some(h))
        }), &q, 1e-6, true);
        worst = worst.max(g).max(h);
        // The projected variant shares the gradient.
        let (g, _) = check(body_elements(|x| {
            let (e, g, h) = orthogonality_energy(x, 1e5, 1e-3, true);
            (e, g, Some(h))
        }), &q, 1e-6, false);
        worst = worst.max(g);
    }
    worst
}

/// A fixed cube with a dynamic cube hovering over it, twisted about z so
/// that vertex-face and crossing edge-edge pairs are both in range.
struct Stack {
    bodies: Vec<AffineBody>,
    offsets: Vec<Option<usize>>,
    params: BarrierParams,
}

impl Stack {
    fn new(mu: f64) -> Self {
        let lower = AffineBody::fixed("lower", &cuboid(Vec3::repeat(0.1)), mu);
        let upper = AffineBody::dynamic("upper", &cuboid(Vec3::repeat(0.1)).map_vertices(|v| v + Vec3::z() * 0.2), 500.0, mu)
            .unwrap();
        let params = BarrierParams { dhat: 1e-2, kappa: 1e3, ..Default::default() };
        Self { bodies: vec![lower, upper], offsets: vec![None, Some(0)], params }
    }

    fn scene(&self) -> ContactScene<'_> {
        ContactScene { bodies: &self.bodies, offsets: &self.offsets }
    }

    fn random_state(&self, rng: &mut ChaCha8Rng) -> DVector<f64> {
        let gap = rng.random_range(0.2..0.7) * self.params.dhat;
        let twist = Rotation3::from_axis_angle(&Vec3::z_axis(), rng.random_range(0.0..std::f64::consts::FRAC_PI_2));
        let a = twist.matrix() + Matrix3::from_fn(|_, _| rng.random_range(-2e-3..2e-3));
        let p = Vec3::new(rng.random_range(-0.03..0.03), rng.random_range(-0.03..0.03), 0.1 + gap);
        let mut q = DVector::zeros(12);
        q.fixed_rows_mut::<3>(0).copy_from(&p);
        for r in 0..3 {
            for c in 0..3 {
                q[3 + 3 * r + c] = a[(r, c)];
            }
        }
        q
    }

    fn candidates(&self, q: &DVector<f64>) -> Vec<Candidate> {
        let p = world_positions(&self.scene(), q);
        let meshes: Vec<SweptMesh<'_>> = self
            .bodies
            .iter()
            .enumerate()
            .map(|(i, b)| SweptMesh { body: i, mesh: &b.mesh, start: &p[i], end: &p[i] })
            .collect();
        broadphase(&meshes, 2.0 * self.params.dhat, |a, b| a != b, Execution::Sequential)
    }
}

pub fn barrier() -> f64 {
    let mut worst: f64 = 0.0;
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let stack = Stack::new(0.0);
    let mut pairs = 0;
    for _ in 0..STATES {
        let q = stack.random_state(&mut rng);
        let cands = stack.candidates(&q);
        let positions = world_positions(&stack.scene(), &q);
        pairs += active_pairs(&stack.scene(), &positions, &cands, stack.params.dhat, Execution::Sequential).unwrap().len();
        let elements = |x: &DVector<f64>, order| {
            contact_elements(&stack.scene(), x, &cands, &stack.params, order, Execution::Sequential).unwrap().0
        };
        let (g, _) = check(elements, &q, 1e-7, false);
        worst = worst.max(g);
    }
    assert!(pairs > 10 * STATES, "too few active pairs ({pairs})");
    worst
}

pub fn friction() -> f64 {
    let mut worst: f64 = 0.0;
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let stack = Stack::new(0.4);
    let eps = 1e-4;
    for _ in 0..STATES {
        let q_prev = stack.random_state(&mut rng);
        let cands = stack.candidates(&q_prev);
        let positions = world_positions(&stack.scene(), &q_prev);
        let pairs = active_pairs(&stack.scene(), &positions, &cands, stack.params.dhat, Execution::Sequential).unwrap();
        let anchors = build_anchors(&stack.scene(), &positions, &pairs, &stack.params);
        assert!(!anchors.is_empty());
        // Slip ranging from well inside the smoothing width to beyond it.
        let scale = rng.random_range(0.0..3.0) * eps;
        let q = &q_prev + DVector::from_fn(12, |_, _| rng.random_range(-scale..scale));
        let elements = |x: &DVector<f64>, order| friction_elements(&anchors, x, eps, order, Execution::Sequential);
        let (g, _) = check(elements, &q, 1e-9, false);
        worst = worst.max(g);
        let (_, _, hess) = assemble(&elements(&q, Order::Hessian), 12);
        assert!(hess.symmetric_eigenvalues().min() >= -1e-9 * hess.norm(), "friction Hessian indefinite");
    }
    worst
}

fn block(center: Vec3) -> affine_ipc::geometry::SurfaceMesh {
    cuboid(Vec3::new(0.1, 0.02, 0.02)).map_vertices(|v| v + center)
}

/// Two dynamic blocks joined at `(0.1, 0, 0)` about (or along) z, with the
/// upper limit just above the construction pose.
fn chain(kind: JointKind) -> (Vec<AffineBody>, Vec<JointSpec>) {
    let a = AffineBody::dynamic("a", &block(Vec3::zeros()), 1000.0, 0.0).unwrap();
    let b = AffineBody::dynamic("b", &block(Vec3::new(0.2, 0.0, 0.0)), 1000.0, 0.0).unwrap();
    let bodies = vec![a, b];
    let limits = match kind {
        JointKind::Prismatic => [-0.05, 0.003],
        _ => [-1.0, 0.03],
    };
    let j = JointSpec::new("j", kind, 0, 1, &bodies, Vec3::new(0.1, 0.0, 0.0), Vec3::z(), Some(limits)).unwrap();
    (bodies, vec![j])
}

fn perturbed(world: &World, rng: &mut ChaCha8Rng, scale: f64) -> DVector<f64> {
    let q = world.full_q();
    &q + DVector::from_fn(q.len(), |_, _| rng.random_range(-scale..scale))
}

pub fn limits() -> f64 {
    let mut worst: f64 = 0.0;
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let params = BarrierParams { dhat: 1e-2, kappa: 1e3, ..Default::default() };
    for kind in [JointKind::Prismatic, JointKind::Revolute] {
        let (bodies, joints) = chain(kind);
        let world = World::new(bodies, joints, SolverParams::default()).unwrap();
        let offsets = &world.reduction.offsets;
        for _ in 0..STATES {
            let q = perturbed(&world, &mut rng, 1e-4);
            let (_, lo, hi) = limit_margins(&world.joints, offsets, &q)[0];
            assert!(lo > 0.0 && hi > 0.0 && hi < params.dhat, "{kind:?} margins {lo} {hi}");
            let elements = |x: &DVector<f64>, order| limit_elements(&world.joints, offsets, x, &params, order).unwrap();
            let (g, _) = check(elements, &q, 1e-7, false);
            worst = worst.max(g);
        }
    }
    worst
}

pub fn motors() -> f64 {
    let mut worst: f64 = 0.0;
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    for kind in [JointKind::Prismatic, JointKind::Revolute] {
        let (bodies, joints) = chain(kind);
        let world = World::new(bodies, joints, SolverParams::default()).unwrap();
        let offsets = &world.reduction.offsets;
        for _ in 0..STATES {
            let q = perturbed(&world, &mut rng, 1e-3);
            let motor = ResolvedMotor { joint: 0, target: Some(rng.random_range(-0.04..0.0)), force: None, kappa: 1e4 };
            let elements =
                |x: &DVector<f64>, order| motor_elements(&[motor], &world.joints, offsets, x, order).unwrap();
            let (g, _) = check(elements, &q, 1e-7, false);
            worst = worst.max(g);
        }
    }
    worst
}

pub fn lateral_penalty() -> f64 {
    let mut worst: f64 = 0.0;
    let mut rng = ChaCha8Rng::seed_from_u64(16);
    let (bodies, joints) = chain(JointKind::Prismatic);
    let world = World::new(bodies, joints, SolverParams::default()).unwrap();
    assert_eq!(world.reduction.penalty_joints, vec![0]);
    let offsets = &world.reduction.offsets;
    for _ in 0..STATES {
        let q = perturbed(&world, &mut rng, 1e-3);
        let elements = |x: &DVector<f64>, order| {
            lateral_penalty_elements(&world.reduction.penalty_joints, &world.joints, offsets, x, 1e4, order).unwrap()
        };
        let (g, _) = check(elements, &q, 1e-7, false);
        worst = worst.max(g);
    }
    worst
}

/// The full incremental potential in reduced coordinates: FD gradient and
/// a positive semi-definite Hessian.
pub fn incremental_potential() -> f64 {
    let mut worst: f64 = 0.0;
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let params = SolverParams {
        barrier: BarrierParams { dhat: 1e-2, kappa: 1e3, ..Default::default() },
        ..Default::default()
    };
    let stack = Stack::new(0.5);
    let (mut bodies, mut joints) = chain(JointKind::Revolute);
    // Chain bodies sit far from the stack so only the joint terms couple them.
    for b in &mut bodies {
        b.q[1] += 1.0;
    }
    joints.clear();
    bodies.extend(stack.bodies.iter().cloned());
    let (a, b) = (bodies[0].clone(), bodies[1].clone());
    let joint = JointSpec::new("j", JointKind::Prismatic, 0, 1, &[a, b], Vec3::new(0.1, 1.0, 0.0), Vec3::z(), Some([-0.05, 0.003]))
        .unwrap();
    joints.push(joint);
    let world = World::new(bodies, joints, params).unwrap();
    let upper = world.reduction.offsets[3].unwrap();
    let s_pinv = world.reduction.s.clone().pseudo_inverse(1e-12).unwrap();
    for _ in 0..STATES {
        let mut target = world.full_q();
        target.rows_mut(upper, 12).copy_from(&stack.random_state(&mut rng));
        let y_prev = &world.y + &s_pinv * (&target - world.full_q());
        let q_prev = world.reduction.full(&y_prev);
        let cands = world.candidates(&q_prev, &q_prev, 2.0 * params.barrier.dhat);
        let positions = world.positions(&q_prev);
        let pairs = active_pairs(&world.contact_scene(), &positions, &cands, params.barrier.dhat, Execution::Sequential).unwrap();
        let q_tilde = &q_prev + DVector::from_fn(q_prev.len(), |_, _| rng.random_range(-1e-4..1e-4));
        let step = StepData {
            anchors: build_anchors(&world.contact_scene(), &positions, &pairs, &params.barrier),
            motors: vec![ResolvedMotor { joint: 0, target: Some(-0.01), force: None, kappa: 1e4 }],
            q_prev,
            q_tilde,
        };
        assert!(!step.anchors.is_empty());
        let potential = IncrementalPotential { world: &world, step: &step };
        let y = &y_prev + DVector::from_fn(y_prev.len(), |_, _| rng.random_range(-1e-5..1e-5));
        let eval = potential.evaluate(&y, &cands, Order::Hessian).unwrap();
        assert!(eval.min_distance < params.barrier.dhat);
        let energy = |x: &DVector<f64>| potential.evaluate(x, &cands, Order::Value).unwrap().energy;
        let err = relative(&fd_gradient(&energy, &y, 1e-8), &eval.gradient);
        worst = worst.max(err);
        let h = DMatrix::from(eval.hessian.as_ref().unwrap());
        let eig = h.symmetric_eigenvalues();
        assert!(eig.min() >= -1e-9 * eig.amax(), "min eigenvalue {}", eig.min());
    }
    worst
}
