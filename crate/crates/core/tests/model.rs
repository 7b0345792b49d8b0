//! Dynamics, motors and solver behaviour against closed-form expectations.

use std::path::Path;

use affine_ipc::articulation::{motor_elements, motor_force, JointKind, JointSpec, MotorCommand, MotorMode, ResolvedMotor};
use affine_ipc::assembly::Order;
use affine_ipc::dynamics::AffineBody;
use affine_ipc::geometry::shapes::cuboid;
use affine_ipc::geometry::Vec3;
use affine_ipc::par::Execution;
use affine_ipc::scene::{instantiate, load_scene, read_scene_config};
use affine_ipc::simapi::validation::{grasp_config, max_connection_residual, GraspSetup};
use affine_ipc::solver::{SolverParams, World};
use nalgebra::{DVector, Rotation3};

fn scene_path(name: &str) -> std::path::PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("assets/scenes").join(name)
}

fn block(center: Vec3) -> affine_ipc::geometry::SurfaceMesh {
    cuboid(Vec3::new(0.1, 0.02, 0.02)).map_vertices(|v| v + center)
}

/// Static block with a dynamic block hinged or slid at `(0.1, 0, 0)`, axis z.
fn chain(kind: JointKind, limits: Option<[f64; 2]>) -> World {
    let bodies = vec![
        AffineBody::fixed("a", &block(Vec3::zeros()), 0.0),
        AffineBody::dynamic("b", &block(Vec3::new(0.2, 0.0, 0.0)), 1000.0, 0.0).unwrap(),
    ];
    let j = JointSpec::new("j", kind, 0, 1, &bodies, Vec3::new(0.1, 0.0, 0.0), Vec3::z(), limits).unwrap();
    let params = SolverParams { gravity: Vec3::zeros(), ..Default::default() };
    World::new(bodies, vec![j], params).unwrap()
}

/// Child coordinates after a rigid motion `x ↦ R (x − o) + o + t`.
fn moved_child(world: &World, rot: Rotation3<f64>, origin: Vec3, shift: Vec3) -> DVector<f64> {
    let mut q = world.full_q();
    let p = Vec3::new(q[0], q[1], q[2]);
    let p = rot * (p - origin) + origin + shift;
    q.fixed_rows_mut::<3>(0).copy_from(&p);
    for r in 0..3 {
        for c in 0..3 {
            q[3 + 3 * r + c] = rot[(r, c)];
        }
    }
    q
}

#[test]
fn free_fall_single_step() {
    let cube = AffineBody::dynamic("cube", &cuboid(Vec3::repeat(0.1)), 1000.0, 0.0).unwrap();
    let mut world = World::new(vec![cube], Vec::new(), SolverParams::default()).unwrap();
    let before = world.center_of_mass(0);
    let h = world.params.h;
    world.step(&[]).unwrap();
    let d = world.center_of_mass(0) - before;
    // Backward Euler from rest: Δx = h² g.
    assert!((d.z + 9.8 * h * h).abs() < 1e-10, "{}", d.z);
    assert!(d.x.abs() < 1e-12 && d.y.abs() < 1e-12);
}

#[test]
fn velocity_motor_advances_one_step() {
    for kind in [JointKind::Prismatic, JointKind::Revolute] {
        let mut world = chain(kind, None);
        let v = 0.1;
        world.step(&[MotorCommand { joint: 0, mode: MotorMode::Velocity, target: v }]).unwrap();
        let advanced = world.joint_coordinates[0];
        assert!((advanced - world.params.h * v).abs() < 1e-6, "{kind:?}: {advanced}");
    }
}

#[test]
fn joint_coordinates_of_known_motions() {
    let world = chain(JointKind::Prismatic, None);
    let j = &world.joints[0];
    let q = moved_child(&world, Rotation3::identity(), Vec3::zeros(), Vec3::new(0.0, 0.0, 0.02));
    assert!((j.raw_coordinate(&world.reduction.offsets, &q) - 0.02).abs() < 1e-9);

    let world = chain(JointKind::Revolute, None);
    let j = &world.joints[0];
    for theta in [-1.2, -0.3, 0.4, 1.0] {
        let rot = Rotation3::from_axis_angle(&Vec3::z_axis(), theta);
        let q = moved_child(&world, rot, Vec3::new(0.1, 0.0, 0.0), Vec3::zeros());
        let read = j.raw_coordinate(&world.reduction.offsets, &q);
        assert!((read - theta).abs() < 1e-9, "{read} vs {theta}");
    }
}

#[test]
fn limits_stop_motion_in_both_directions() {
    for (force, bound) in [(50.0, 0.03), (-50.0, -0.02)] {
        let mut world = chain(JointKind::Prismatic, Some([-0.02, 0.03]));
        let cmd = [MotorCommand { joint: 0, mode: MotorMode::Torque, target: force }];
        for _ in 0..80 {
            world.step(&cmd).unwrap();
            let s = world.joint_coordinates[0];
            assert!(s > -0.02 && s < 0.03, "{s}");
        }
        assert!((world.joint_coordinates[0] - bound).abs() < 2e-3, "{force}: {}", world.joint_coordinates[0]);
    }
}

#[test]
fn motor_penalty_vanishes_at_target() {
    for (kind, target) in [(JointKind::Prismatic, 0.015), (JointKind::Revolute, 0.7)] {
        let world = chain(kind, None);
        let q = match kind {
            JointKind::Prismatic => moved_child(&world, Rotation3::identity(), Vec3::zeros(), Vec3::z() * target),
            _ => moved_child(&world, Rotation3::from_axis_angle(&Vec3::z_axis(), target), Vec3::new(0.1, 0.0, 0.0), Vec3::zeros()),
        };
        let motor = ResolvedMotor { joint: 0, target: Some(target), force: None, kappa: 1e5 };
        let el = motor_elements(&[motor], &world.joints, &world.reduction.offsets, &q, Order::Gradient).unwrap();
        assert!(el[0].energy < 1e-20, "{kind:?}: {}", el[0].energy);
        assert!(el[0].grad.norm() < 1e-9, "{kind:?}: {}", el[0].grad.norm());
        let motor = ResolvedMotor { target: Some(target + 0.01), ..motor };
        let el = motor_elements(&[motor], &world.joints, &world.reduction.offsets, &q, Order::Value).unwrap();
        assert!(el[0].energy > 0.0);
    }
}

#[test]
fn prismatic_force_acts_along_the_axis() {
    let world = chain(JointKind::Prismatic, None);
    let motor = ResolvedMotor { joint: 0, target: None, force: Some(3.5), kappa: 0.0 };
    let (body, f) = motor_force(&motor, &world.joints, &world.reduction.offsets, &world.full_q()).unwrap();
    assert_eq!(body, 1);
    assert!((Vec3::new(f[0], f[1], f[2]) - Vec3::new(0.0, 0.0, 3.5)).norm() < 1e-12);
}

fn run_cube_drop(tol_v: f64, exec: Execution, steps: usize) -> World {
    let mut config = read_scene_config(&scene_path("cube_drop.json")).unwrap();
    config.params.tol_v = tol_v;
    config.params.execution = exec;
    let mut scene = instantiate(config, Path::new(".")).unwrap();
    for _ in 0..steps {
        let r = scene.world.step(&[]).unwrap();
        assert!(r.energy_history.windows(2).all(|w| w[1] < w[0]), "{:?}", r.energy_history);
    }
    scene.world
}

#[test]
fn tighter_tolerance_barely_moves_the_result() {
    let coarse = run_cube_drop(1e-3, Execution::Parallel, 60);
    let fine = run_cube_drop(1e-4, Execution::Parallel, 60);
    let (qa, qb) = (coarse.full_q(), fine.full_q());
    let (pa, pb) = (coarse.positions(&qa), fine.positions(&qb));
    let worst = pa[1].iter().zip(&pb[1]).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
    assert!(worst < 1e-3, "{worst}");
}

#[test]
fn runs_are_bitwise_repeatable() {
    let a = run_cube_drop(1e-3, Execution::Parallel, 40);
    let b = run_cube_drop(1e-3, Execution::Parallel, 40);
    let c = run_cube_drop(1e-3, Execution::Sequential, 40);
    assert_eq!(a.y.as_slice(), b.y.as_slice());
    assert_eq!(a.y.as_slice(), c.y.as_slice());
    assert_eq!(a.bodies[1].qdot, c.bodies[1].qdot);
}

#[test]
fn joints_stay_connected_while_grasping() {
    let config = grasp_config(&GraspSetup { density: 1000.0, mu: 0.5, force: 5.0 });
    let mut scene = instantiate(config, Path::new(".")).unwrap();
    assert!(scene.world.reduction.penalty_joints.is_empty());
    for step in 0..40 {
        let cmds = scene.commands_at(step);
        let report = scene.world.step(&cmds).unwrap();
        assert!(report.converged);
        let r = max_connection_residual(&scene);
        assert!(r < 1e-10, "step {step}: {r:e}");
    }
}

#[test]
fn bundled_scene_loads_and_steps() {
    let mut scene = load_scene(&scene_path("cube_drop.json")).unwrap();
    let z0 = scene.world.center_of_mass(1).z;
    for _ in 0..10 {
        scene.world.step(&[]).unwrap();
    }
    assert!(scene.world.center_of_mass(1).z < z0);
}
