//! Peg-in-hole environment: a gripper holding a prismatic peg above a
//! funnel container, driven by a 3-DOF velocity command per step.

use std::f64::consts::PI;
use std::path::Path;

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::validation::{cmd, gripper, FINGER_REACH};
use super::TrajectoryHeader;
use crate::articulation::MotorMode;
use crate::geometry::Vec3;
use crate::scene::{instantiate, Placement, PropConfig, Scene, SceneConfig, SceneError, ScheduledCommand, ShapeConfig};
use crate::solver::{SolverError, SolverParams};

#[derive(Debug, Error)]
pub enum EnvError {
    #[error("no intersection-free start found after {attempts} samples")]
    Placement { attempts: usize },
    #[error(transparent)]
    Scene(#[from] SceneError),
    #[error("environment not reset")]
    NotReset,
    #[error("episode is done; call reset")]
    Done,
    #[error("action component {index} is not finite")]
    InvalidAction { index: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Easy,
    Hard,
}

/// Geometry, reward and episode constants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EnvConfig {
    pub params: SolverParams,
    pub easy_radius: f64,
    pub hard_radius: f64,
    pub hole_radius: f64,
    pub peg_height: f64,
    pub segments: usize,
    /// Polygon phase shared by peg and container, so facets face the fingers.
    pub phase: f64,
    pub rim: f64,
    pub funnel_height: f64,
    pub mouth_radius: f64,
    /// Height of the peg bottom at reset.
    pub start_height: f64,
    /// Random horizontal offset of the start is uniform in this disc.
    pub spawn_radius: f64,
    pub max_steps: usize,
    pub action_bound: f64,
    /// Scale of the velocity reward.
    pub reward_scale: f64,
    /// Success once the peg bottom is this far below the rim.
    pub target_depth: f64,
    pub grip_force: f64,
    pub peg_density: f64,
    pub mu: f64,
    /// Grasp centre below the peg top.
    pub grasp_depth: f64,
    pub max_placement_attempts: usize,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            params: SolverParams::default(),
            easy_radius: 0.035,
            hard_radius: 0.039,
            hole_radius: 0.04,
            peg_height: 0.2,
            segments: 24,
            phase: PI / 24.0,
            rim: 0.1,
            funnel_height: 0.03,
            mouth_radius: 0.075,
            start_height: 0.14,
            spawn_radius: 0.02,
            max_steps: 200,
            action_bound: 0.05,
            reward_scale: 1.0,
            target_depth: 0.02,
            grip_force: 30.0,
            peg_density: 1000.0,
            mu: 0.5,
            grasp_depth: 0.045,
            max_placement_attempts: 100,
        }
    }
}

impl EnvConfig {
    pub fn peg_radius(&self, task: Task) -> f64 {
        match task {
            Task::Easy => self.easy_radius,
            Task::Hard => self.hard_radius,
        }
    }

    /// Insertion margin `r₂ − r₁`.
    pub fn margin(&self, task: Task) -> f64 {
        self.hole_radius - self.peg_radius(task)
    }

    /// Scene for a given start offset of the gripper and peg.
    pub fn scene_config(&self, task: Task, offset: [f64; 2]) -> SceneConfig {
        let r = self.peg_radius(task);
        let dhat = self.params.barrier.dhat;
        let apothem = r * (PI / self.segments as f64).cos();
        let peg_z = self.start_height + 0.5 * self.peg_height;
        let grasp_z = self.start_height + self.peg_height - self.grasp_depth;
        let closure = FINGER_REACH - apothem - 0.5 * dhat;
        let mut robot = gripper(Vec3::new(offset[0], offset[1], grasp_z), 0.0, closure);
        robot.mu = Some(self.mu);
        SceneConfig {
            params: self.params,
            robots: vec![robot],
            props: vec![
                PropConfig {
                    name: CONTAINER.into(),
                    shape: ShapeConfig::Funnel {
                        inner_radius: self.hole_radius,
                        mouth_radius: self.mouth_radius,
                        rim: self.rim,
                        funnel_height: self.funnel_height,
                        segments: self.segments,
                        phase: self.phase,
                    },
                    placement: Placement::default(),
                    is_static: true,
                    density: None,
                    mu: Some(self.mu),
                    collide: true,
                    velocity: Vec3::zeros(),
                },
                PropConfig {
                    name: PEG.into(),
                    shape: ShapeConfig::Cylinder { radius: r, height: self.peg_height, segments: self.segments, phase: self.phase },
                    placement: Placement { position: Vec3::new(offset[0], offset[1], peg_z), rpy: Vec3::zeros() },
                    is_static: false,
                    density: Some(self.peg_density),
                    mu: Some(self.mu),
                    collide: true,
                    velocity: Vec3::zeros(),
                },
            ],
            external_control: true,
            steps: self.max_steps,
            ..Default::default()
        }
    }
}

pub const PEG: &str = "peg";
pub const CONTAINER: &str = "container";

/// Velocity reward: downward motion pays while the peg is over the mouth;
/// elsewhere only upward motion counts, as a penalty.
pub fn velocity_reward(scale: f64, vz: f64, horizontal: f64, mouth_radius: f64) -> f64 {
    let r = scale * -vz;
    if horizontal <= mouth_radius {
        r
    } else {
        r.min(0.0)
    }
}

/// Completion bonus at step `s` of `max_steps`.
pub fn completion_reward(s: usize, max_steps: usize) -> f64 {
    100.0 + 100.0 * (1.0 - s as f64 / max_steps as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvState {
    pub step: usize,
    pub max_steps: usize,
    pub obs: [f64; 3],
    pub done: bool,
    pub success: bool,
    pub cumulative_reward: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepInfo {
    pub step: usize,
    pub success: bool,
    pub velocity_reward: f64,
    pub completion_reward: f64,
    pub peg_bottom: f64,
    pub iterations: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub min_distance: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepResult {
    pub obs: [f64; 3],
    pub reward: f64,
    pub done: bool,
    pub info: StepInfo,
}

pub struct PegInHoleEnv {
    pub config: EnvConfig,
    episode: Option<Episode>,
}

struct Episode {
    task: Task,
    scene: Scene,
    peg: usize,
    state: EnvState,
}

impl PegInHoleEnv {
    pub fn new(config: EnvConfig) -> Self {
        Self { config, episode: None }
    }

    pub fn state(&self) -> Option<&EnvState> {
        self.episode.as_ref().map(|e| &e.state)
    }

    pub fn scene(&self) -> Option<&Scene> {
        self.episode.as_ref().map(|e| &e.scene)
    }

    pub fn task(&self) -> Option<Task> {
        self.episode.as_ref().map(|e| e.task)
    }

    /// Samples a start uniformly in the spawn disc, rejecting placements
    /// that fail the load-time intersection check.
    pub fn reset(&mut self, task: Task, seed: u64) -> Result<[f64; 3], EnvError> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let attempts = self.config.max_placement_attempts;
        for _ in 0..attempts {
            let radius = self.config.spawn_radius * rng.random_range(0.0..1.0f64).sqrt();
            let angle = rng.random_range(0.0..2.0 * PI);
            match self.reset_at(task, [radius * angle.cos(), radius * angle.sin()]) {
                Err(EnvError::Scene(SceneError::Intersecting(_))) => continue,
                other => return other,
            }
        }
        Err(EnvError::Placement { attempts })
    }

    /// Starts an episode at a given horizontal offset.
    pub fn reset_at(&mut self, task: Task, offset: [f64; 2]) -> Result<[f64; 3], EnvError> {
        self.episode = None;
        let scene = instantiate(self.config.scene_config(task, offset), Path::new("."))?;
        let peg = scene.world.body_index(PEG).expect("peg body");
        let obs = observe(&scene, peg);
        let state = EnvState {
            step: 0,
            max_steps: self.config.max_steps,
            obs,
            done: false,
            success: false,
            cumulative_reward: 0.0,
        };
        self.episode = Some(Episode { task, scene, peg, state });
        Ok(obs)
    }

    pub fn step(&mut self, action: [f64; 3]) -> Result<StepResult, EnvError> {
        let config = &self.config;
        let episode = self.episode.as_mut().ok_or(EnvError::NotReset)?;
        if episode.state.done {
            return Err(EnvError::Done);
        }
        if let Some(index) = action.iter().position(|v| !v.is_finite()) {
            return Err(EnvError::InvalidAction { index });
        }
        let v = action.map(|a| a.clamp(-config.action_bound, config.action_bound));
        let commands: Vec<ScheduledCommand> = vec![
            cmd("slide_x", MotorMode::Velocity, v[0]),
            cmd("slide_y", MotorMode::Velocity, v[1]),
            cmd("slide_z", MotorMode::Velocity, v[2]),
            cmd("finger_left_slide", MotorMode::Torque, config.grip_force),
            cmd("finger_right_slide", MotorMode::Torque, config.grip_force),
        ];
        let world = &mut episode.scene.world;
        let commands = commands
            .iter()
            .map(|c| {
                let joint = world.joint_index(&c.joint).expect("gripper joint");
                crate::articulation::MotorCommand { joint, mode: c.mode, target: c.target }
            })
            .collect::<Vec<_>>();
        let state = &mut episode.state;
        let outcome = world.step(&commands);
        state.step += 1;
        let mut info = StepInfo {
            step: state.step,
            success: false,
            velocity_reward: 0.0,
            completion_reward: 0.0,
            peg_bottom: peg_bottom(&episode.scene, episode.peg),
            iterations: 0,
            min_distance: None,
            error: None,
        };
        let report = match outcome {
            Ok(r) => r,
            Err(e) => {
                state.done = true;
                info.error = Some(solver_diagnostic(&e));
                return Ok(StepResult { obs: state.obs, reward: 0.0, done: true, info });
            }
        };
        let world = &episode.scene.world;
        let obs = observe(&episode.scene, episode.peg);
        let vz = world.bodies[episode.peg].qdot[2];
        let horizontal = obs[0].hypot(obs[1]);
        let r1 = velocity_reward(config.reward_scale, vz, horizontal, config.mouth_radius);
        let success = info.peg_bottom <= config.rim - config.target_depth;
        let r2 = if success { completion_reward(state.step, state.max_steps) } else { 0.0 };
        let reward = r1 + r2;
        state.obs = obs;
        state.success = success;
        state.done = success || state.step >= state.max_steps;
        state.cumulative_reward += reward;
        info.success = success;
        info.velocity_reward = r1;
        info.completion_reward = r2;
        info.iterations = report.iterations;
        info.min_distance = report.min_distance;
        Ok(StepResult { obs, reward, done: state.done, info })
    }

    /// Trajectory header with the environment constants as metadata.
    pub fn header(&self) -> Option<TrajectoryHeader> {
        let episode = self.episode.as_ref()?;
        let meta = serde_json::json!({ "task": episode.task, "env": self.config });
        Some(TrajectoryHeader::new(&episode.scene.world, meta))
    }
}

fn observe(scene: &Scene, peg: usize) -> [f64; 3] {
    let c = scene.world.center_of_mass(peg);
    [c.x, c.y, c.z]
}

fn peg_bottom(scene: &Scene, peg: usize) -> f64 {
    let q = scene.world.full_q();
    scene.world.positions(&q)[peg].iter().map(|v| v.z).fold(f64::INFINITY, f64::min)
}

fn solver_diagnostic(e: &SolverError) -> String {
    match e {
        SolverError::Stalled { diagnostic, .. } => format!("{e}: {diagnostic}"),
        _ => e.to_string(),
    }
}
