//! Validation scenes: beam insertion, tiny-clearance resting and the
//! grasp-force bisections.

use std::f64::consts::FRAC_PI_2;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{RunError, GANTRY_GRIPPER_URDF};
use crate::articulation::{JointKind, MotorMode};
use crate::contact::BarrierParams;
use crate::geometry::Vec3;
use crate::scene::{
    instantiate, JointConfig, Placement, PropConfig, RobotConfig, Scene, SceneConfig, ScheduleSegment, ScheduledCommand,
    ShapeConfig,
};
use crate::solver::{SolverParams, SolverReport};

/// Robot name prefix used by the built-in scenes.
pub const GRIPPER: &str = "gripper";

pub fn gripper_joint(name: &str) -> String {
    format!("{GRIPPER}/{name}")
}

pub(crate) fn gripper(position: Vec3, yaw: f64, finger_closure: f64) -> RobotConfig {
    RobotConfig {
        urdf: None,
        urdf_text: Some(GANTRY_GRIPPER_URDF.to_string()),
        prefix: Some(GRIPPER.into()),
        placement: Placement { position, rpy: Vec3::new(0.0, 0.0, yaw) },
        fixed_base: true,
        mu: None,
        density_scale: None,
        initial_positions: [("finger_left_slide", finger_closure), ("finger_right_slide", finger_closure)]
            .into_iter()
            .map(|(k, v)| (k.to_string(), v))
            .collect(),
    }
}

pub(crate) fn cmd(joint: &str, mode: MotorMode, target: f64) -> ScheduledCommand {
    ScheduledCommand { joint: gripper_joint(joint), mode, target }
}

fn hold_xy() -> Vec<ScheduledCommand> {
    vec![cmd("slide_x", MotorMode::Position, 0.0), cmd("slide_y", MotorMode::Position, 0.0)]
}

/// Inner face of each finger pad sits this far from the grasp centre.
pub const FINGER_REACH: f64 = 0.04;
/// Palm underside above the grasp centre.
pub const PALM_CLEARANCE: f64 = 0.055;

// Beam insertion.

pub const BEAM_LENGTH: f64 = 0.5;
pub const BEAM_HEIGHT: f64 = 0.1;
pub const BEAM_THICKNESS: f64 = 0.01;
pub const NOTCH_WIDTH: f64 = 0.01;
pub const NOTCH_DEPTH: f64 = 0.05;
pub const BEAM_START_GAP: f64 = 0.005;
pub const BEAM_DESCENT: f64 = 0.0475;
pub const BEAM_SPEED: f64 = 0.05;
/// Insertion depth that counts as complete.
pub const BEAM_REQUIRED_DEPTH: f64 = 0.04;
/// The gripper holds the upper beam this far from the notch along its
/// length so the fingers pass beside the lower beam.
pub const BEAM_GRASP_OFFSET: f64 = 0.1;

pub fn beam_insertion_config(width: f64) -> SceneConfig {
    let bottom_top = BEAM_HEIGHT;
    let top_bottom = bottom_top + BEAM_START_GAP;
    // Top of the upper beam sits just under the palm.
    let grasp_z = top_bottom + BEAM_HEIGHT - PALM_CLEARANCE + 0.002;
    let descend_steps = (BEAM_DESCENT / (BEAM_SPEED * 0.01)).round() as usize;
    let mut hold = hold_xy();
    hold.push(cmd("finger_left_slide", MotorMode::Position, 0.0));
    hold.push(cmd("finger_right_slide", MotorMode::Position, 0.0));
    let mut down = hold.clone();
    down.push(cmd("slide_z", MotorMode::Velocity, -BEAM_SPEED));
    let mut stop = hold;
    stop.push(cmd("slide_z", MotorMode::Velocity, 0.0));
    SceneConfig {
        params: SolverParams::default(),
        robots: vec![gripper(Vec3::new(0.0, BEAM_GRASP_OFFSET, grasp_z), FRAC_PI_2, 0.0)],
        props: vec![
            PropConfig {
                name: "bottom_beam".into(),
                shape: ShapeConfig::NotchedBeam {
                    length: BEAM_LENGTH,
                    thickness: BEAM_THICKNESS,
                    height: BEAM_HEIGHT,
                    slot_width: NOTCH_WIDTH,
                    slot_depth: NOTCH_DEPTH,
                },
                placement: Placement::default(),
                is_static: true,
                density: None,
                mu: Some(0.3),
                collide: true,
                velocity: Vec3::zeros(),
            },
            PropConfig {
                name: "top_beam".into(),
                shape: ShapeConfig::Box { size: Vec3::new(width, BEAM_LENGTH, BEAM_HEIGHT) },
                placement: Placement { position: Vec3::new(0.0, 0.0, top_bottom + 0.5 * BEAM_HEIGHT), rpy: Vec3::zeros() },
                is_static: false,
                density: Some(1000.0),
                mu: Some(0.3),
                collide: true,
                velocity: Vec3::zeros(),
            },
        ],
        joints: vec![JointConfig {
            name: "beam_weld".into(),
            kind: JointKind::Fixed,
            parent: format!("{GRIPPER}/palm"),
            child: "top_beam".into(),
            origin: Vec3::new(0.0, BEAM_GRASP_OFFSET, top_bottom + BEAM_HEIGHT),
            axis: Vec3::z(),
            limits: None,
        }],
        schedule: vec![
            ScheduleSegment { from: 0, to: descend_steps, commands: down },
            ScheduleSegment { from: descend_steps, to: descend_steps + 15, commands: stop },
        ],
        steps: descend_steps + 15,
        ..Default::default()
    }
}

/// Per-step solver properties accumulated over one or more runs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunAudit {
    pub runs: usize,
    pub steps: usize,
    /// Every accepted line-search step strictly lowered the energy.
    pub energy_monotone: bool,
    /// Worst joint connection residual after any step (m).
    pub max_connection_residual: f64,
}

impl Default for RunAudit {
    fn default() -> Self {
        Self { runs: 0, steps: 0, energy_monotone: true, max_connection_residual: 0.0 }
    }
}

impl RunAudit {
    fn new() -> Self {
        Self { runs: 1, ..Default::default() }
    }

    pub fn record(&mut self, report: &SolverReport, scene: &Scene) {
        self.steps += 1;
        self.energy_monotone &= report.energy_history.windows(2).all(|w| w[1] < w[0]);
        self.max_connection_residual = self.max_connection_residual.max(max_connection_residual(scene));
    }

    pub fn merge(&mut self, other: &RunAudit) {
        self.runs += other.runs;
        self.steps += other.steps;
        self.energy_monotone &= other.energy_monotone;
        self.max_connection_residual = self.max_connection_residual.max(other.max_connection_residual);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeamOutcome {
    pub width: f64,
    pub steps: usize,
    /// How far the upper beam's bottom face went below the notch entry.
    pub depth: f64,
    pub min_distance: f64,
    pub audit: RunAudit,
    pub completed: bool,
}

pub fn run_beam_insertion(width: f64) -> Result<BeamOutcome, RunError> {
    let config = beam_insertion_config(width);
    let steps = config.steps;
    let mut scene = instantiate(config, Path::new("."))?;
    let beam = scene.world.body_index("top_beam").expect("beam body");
    let mut min_distance = f64::INFINITY;
    let mut audit = RunAudit::new();
    for step in 0..steps {
        let cmds = scene.commands_at(step);
        let r = scene.world.step(&cmds).map_err(|source| RunError::Solver { step, source })?;
        audit.record(&r, &scene);
        min_distance = min_distance.min(scene.world.min_separation());
    }
    let bottom = lowest_point(&scene, beam);
    let depth = BEAM_HEIGHT - bottom;
    Ok(BeamOutcome {
        width,
        steps,
        depth,
        min_distance,
        audit,
        completed: depth >= BEAM_REQUIRED_DEPTH && min_distance > 0.0,
    })
}

pub fn max_connection_residual(scene: &Scene) -> f64 {
    let q = scene.world.full_q();
    scene
        .world
        .joints
        .iter()
        .map(|j| crate::articulation::connection_residual(j, &scene.world.reduction.offsets, &q))
        .fold(0.0, f64::max)
}

fn lowest_point(scene: &Scene, body: usize) -> f64 {
    let q = scene.world.full_q();
    scene.world.positions(&q)[body].iter().map(|v| v.z).fold(f64::INFINITY, f64::min)
}

// Tiny clearance.

pub const PLATE_SIZE: Vec3 = Vec3::new(0.1, 0.1, 0.01);

pub fn tiny_clearance_config(dhat: f64) -> SceneConfig {
    SceneConfig {
        params: SolverParams {
            barrier: BarrierParams { dhat, kappa: 1e7, ..Default::default() },
            ..Default::default()
        },
        props: vec![
            PropConfig {
                name: "ground".into(),
                shape: ShapeConfig::Box { size: Vec3::new(0.4, 0.4, 0.05) },
                placement: Placement { position: Vec3::new(0.0, 0.0, -0.025), rpy: Vec3::zeros() },
                is_static: true,
                density: None,
                mu: Some(0.5),
                collide: true,
                velocity: Vec3::zeros(),
            },
            PropConfig {
                name: "plate".into(),
                shape: ShapeConfig::Box { size: PLATE_SIZE },
                placement: Placement { position: Vec3::new(0.0, 0.0, 0.5 * PLATE_SIZE.z + 1e-4), rpy: Vec3::zeros() },
                is_static: false,
                density: Some(1000.0),
                mu: Some(0.5),
                collide: true,
                velocity: Vec3::zeros(),
            },
        ],
        steps: 60,
        ..Default::default()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RestOutcome {
    pub dhat: f64,
    pub distance: f64,
    pub speed: f64,
    pub audit: RunAudit,
}

pub fn run_tiny_clearance(dhat: f64) -> Result<RestOutcome, RunError> {
    let config = tiny_clearance_config(dhat);
    let steps = config.steps;
    let mut scene = instantiate(config, Path::new("."))?;
    let mut audit = RunAudit::new();
    for step in 0..steps {
        let r = scene.world.step(&[]).map_err(|source| RunError::Solver { step, source })?;
        audit.record(&r, &scene);
    }
    let plate = scene.world.body_index("plate").expect("plate body");
    Ok(RestOutcome {
        dhat,
        distance: scene.world.min_separation(),
        speed: scene.world.bodies[plate].qdot.fixed_rows::<3>(0).norm(),
        audit,
    })
}

// Grasp.

pub const CUBE_SIZE: f64 = 0.05;
pub const GRASP_SQUEEZE_STEPS: usize = 20;
pub const LIFT_STEPS: usize = 100;
pub const LIFT_SPEED: f64 = 0.01;
/// Near sticking the friction stiffness is ~μλ/(ε_v h), so a step-size
/// test at the default tolerance leaves a sizeable force residual.
pub const GRASP_TOL_V: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GraspSetup {
    pub density: f64,
    pub mu: f64,
    /// Force of each finger motor (N).
    pub force: f64,
}

impl GraspSetup {
    pub fn cube_mass(&self) -> f64 {
        self.density * CUBE_SIZE.powi(3)
    }
}

pub fn grasp_config(setup: &GraspSetup) -> SceneConfig {
    let params = SolverParams { tol_v: GRASP_TOL_V, ..Default::default() };
    let dhat = params.barrier.dhat;
    let half = 0.5 * CUBE_SIZE;
    let cube_z = half + 0.5 * dhat;
    let grasp_z = cube_z + 0.01;
    let closure = FINGER_REACH - half - 0.5 * dhat;
    let mut robot = gripper(Vec3::new(0.0, 0.0, grasp_z), 0.0, closure);
    robot.mu = Some(setup.mu);
    let squeeze = |vz: f64| {
        let mut c = hold_xy();
        c.push(cmd("slide_z", MotorMode::Velocity, vz));
        c.push(cmd("finger_left_slide", MotorMode::Torque, setup.force));
        c.push(cmd("finger_right_slide", MotorMode::Torque, setup.force));
        c
    };
    SceneConfig {
        params,
        robots: vec![robot],
        props: vec![
            PropConfig {
                name: "table".into(),
                shape: ShapeConfig::Box { size: Vec3::new(0.4, 0.4, 0.05) },
                placement: Placement { position: Vec3::new(0.0, 0.0, -0.025), rpy: Vec3::zeros() },
                is_static: true,
                density: None,
                mu: Some(setup.mu),
                collide: true,
                velocity: Vec3::zeros(),
            },
            PropConfig {
                name: "cube".into(),
                shape: ShapeConfig::Box { size: Vec3::repeat(CUBE_SIZE) },
                placement: Placement { position: Vec3::new(0.0, 0.0, cube_z), rpy: Vec3::zeros() },
                is_static: false,
                density: Some(setup.density),
                mu: Some(setup.mu),
                collide: true,
                velocity: Vec3::zeros(),
            },
        ],
        schedule: vec![
            ScheduleSegment { from: 0, to: GRASP_SQUEEZE_STEPS, commands: squeeze(0.0) },
            ScheduleSegment { from: GRASP_SQUEEZE_STEPS, to: GRASP_SQUEEZE_STEPS + LIFT_STEPS, commands: squeeze(LIFT_SPEED) },
        ],
        steps: GRASP_SQUEEZE_STEPS + LIFT_STEPS,
        ..Default::default()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LiftOutcome {
    pub gripper_rise: f64,
    pub cube_rise: f64,
    pub held: bool,
    pub audit: RunAudit,
}

/// Runs the grasp-and-lift schedule; the cube counts as held when it rose
/// by at least half of the gripper's rise.
pub fn run_grasp(setup: &GraspSetup) -> Result<LiftOutcome, RunError> {
    let config = grasp_config(setup);
    let steps = config.steps;
    let mut scene = instantiate(config, Path::new("."))?;
    let cube = scene.world.body_index("cube").expect("cube body");
    let lift = scene.world.joint_index(&gripper_joint("slide_z")).expect("lift joint");
    let mut start = None;
    let mut audit = RunAudit::new();
    for step in 0..steps {
        if step == GRASP_SQUEEZE_STEPS {
            start = Some((scene.world.center_of_mass(cube).z, scene.world.joint_coordinates[lift]));
        }
        let cmds = scene.commands_at(step);
        let r = scene.world.step(&cmds).map_err(|source| RunError::Solver { step, source })?;
        audit.record(&r, &scene);
    }
    let (cube0, lift0) = start.expect("lift phase reached");
    let cube_rise = scene.world.center_of_mass(cube).z - cube0;
    let gripper_rise = scene.world.joint_coordinates[lift] - lift0;
    Ok(LiftOutcome { gripper_rise, cube_rise, held: cube_rise >= 0.5 * gripper_rise, audit })
}

/// Smallest finger force that holds the cube, to relative precision `rel`,
/// with the audit of every run in the bisection.
pub fn minimal_holding_force(density: f64, mu: f64, rel: f64) -> Result<(f64, RunAudit), RunError> {
    let mut audit = RunAudit::default();
    let mut holds = |force: f64| {
        run_grasp(&GraspSetup { density, mu, force }).map(|o| {
            audit.merge(&o.audit);
            o.held
        })
    };
    let (mut lo, mut hi) = (0.0, 1.0);
    while !holds(hi)? {
        lo = hi;
        hi *= 2.0;
        if hi > 1e4 {
            break;
        }
    }
    while hi - lo > rel * hi {
        let mid = 0.5 * (lo + hi);
        if holds(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok((hi, audit))
}

/// Holding-force bisections over cube mass and friction coefficient.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraspSweep {
    pub mu: f64,
    pub masses: Vec<f64>,
    pub forces: Vec<f64>,
    /// Least-squares slope of force against mass through the origin (N/kg).
    pub slope: f64,
    pub r_squared: f64,
    /// `g / (2μ)`: two friction faces carrying the weight.
    pub coulomb_slope: f64,
    /// Holding force at the first density with μ halved.
    pub half_mu_force: f64,
    pub audit: RunAudit,
}

impl GraspSweep {
    pub fn slope_error(&self) -> f64 {
        (self.slope / self.coulomb_slope - 1.0).abs()
    }

    pub fn half_mu_ratio(&self) -> f64 {
        self.half_mu_force / self.forces[0]
    }
}

/// Fit `y = k x` by least squares; returns `(k, R²)` with R² taken about
/// the mean of `y`.
pub fn fit_through_origin(x: &[f64], y: &[f64]) -> (f64, f64) {
    let k = x.iter().zip(y).map(|(a, b)| a * b).sum::<f64>() / x.iter().map(|a| a * a).sum::<f64>();
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    let ss_res: f64 = x.iter().zip(y).map(|(a, b)| (b - k * a).powi(2)).sum();
    let ss_tot: f64 = y.iter().map(|b| (b - mean).powi(2)).sum();
    (k, 1.0 - ss_res / ss_tot)
}

/// Runs one bisection per density plus one with μ halved, concurrently.
pub fn grasp_sweep(densities: &[f64], mu: f64, rel: f64) -> Result<GraspSweep, RunError> {
    let mut jobs: Vec<(f64, f64)> = densities.iter().map(|&d| (d, mu)).collect();
    jobs.push((densities[0], 0.5 * mu));
    let results: Vec<Result<(f64, RunAudit), RunError>> = std::thread::scope(|s| {
        let handles: Vec<_> = jobs.iter().map(|&(d, m)| s.spawn(move || minimal_holding_force(d, m, rel))).collect();
        handles.into_iter().map(|h| h.join().expect("bisection thread")).collect()
    });
    let mut audit = RunAudit::default();
    let mut forces = Vec::new();
    for r in results {
        let (force, a) = r?;
        audit.merge(&a);
        forces.push(force);
    }
    let half_mu_force = forces.pop().expect("half-μ run");
    let masses: Vec<f64> = densities.iter().map(|&density| GraspSetup { density, mu, force: 0.0 }.cube_mass()).collect();
    let (slope, r_squared) = fit_through_origin(&masses, &forces);
    let g = SolverParams::default().gravity.norm();
    Ok(GraspSweep { mu, masses, forces, slope, r_squared, coulomb_slope: g / (2.0 * mu), half_mu_force, audit })
}
