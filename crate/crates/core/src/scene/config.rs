use std::collections::BTreeMap;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::articulation::{JointKind, MotorMode};
use crate::geometry::Vec3;
use crate::solver::SolverParams;

/// World placement: translation plus fixed-axis roll-pitch-yaw (rad).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct Placement {
    pub position: Vec3,
    pub rpy: Vec3,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShapeConfig {
    Box { size: Vec3 },
    Cylinder { radius: f64, height: f64, #[serde(default = "default_segments")] segments: usize, #[serde(default)] phase: f64 },
    Icosphere { radius: f64, #[serde(default = "default_subdivisions")] subdivisions: usize },
    /// Beam along x with an open slot centred on top; origin at the bottom centre.
    NotchedBeam { length: f64, thickness: f64, height: f64, slot_width: f64, slot_depth: f64 },
    /// Static open container with a funnel mouth; origin at the floor centre.
    Funnel { inner_radius: f64, mouth_radius: f64, rim: f64, funnel_height: f64, #[serde(default = "default_segments")] segments: usize, #[serde(default)] phase: f64 },
    /// OBJ file relative to the scene file.
    Mesh { path: PathBuf, #[serde(default = "unit_scale")] scale: Vec3 },
}

fn default_segments() -> usize {
    24
}

fn default_subdivisions() -> usize {
    2
}

fn unit_scale() -> Vec3 {
    Vec3::repeat(1.0)
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropConfig {
    pub name: String,
    pub shape: ShapeConfig,
    #[serde(default, flatten)]
    pub placement: Placement,
    #[serde(default, rename = "static")]
    pub is_static: bool,
    #[serde(default)]
    pub density: Option<f64>,
    #[serde(default)]
    pub mu: Option<f64>,
    #[serde(default = "default_true")]
    pub collide: bool,
    /// Initial linear velocity (m/s).
    #[serde(default)]
    pub velocity: Vec3,
}

impl PropConfig {
    /// Dynamic, colliding prop at `position` with default material.
    pub fn new(name: impl Into<String>, shape: ShapeConfig, position: Vec3) -> Self {
        Self {
            name: name.into(),
            shape,
            placement: Placement { position, rpy: Vec3::zeros() },
            is_static: false,
            density: None,
            mu: None,
            collide: true,
            velocity: Vec3::zeros(),
        }
    }

    pub fn fixed(mut self) -> Self {
        self.is_static = true;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobotConfig {
    /// URDF path relative to the scene file.
    #[serde(default)]
    pub urdf: Option<PathBuf>,
    /// URDF document given inline instead of by path.
    #[serde(default)]
    pub urdf_text: Option<String>,
    /// Prefix for link and joint names; defaults to the robot name.
    #[serde(default)]
    pub prefix: Option<String>,
    #[serde(default, flatten)]
    pub placement: Placement,
    /// Root link is immovable.
    #[serde(default)]
    pub fixed_base: bool,
    /// Per-link overrides.
    #[serde(default)]
    pub mu: Option<f64>,
    #[serde(default)]
    pub density_scale: Option<f64>,
    /// Joint positions (m or rad, by URDF joint name) at which the robot is
    /// built. Joint coordinates are measured from this pose and limits are
    /// shifted accordingly.
    #[serde(default)]
    pub initial_positions: BTreeMap<String, f64>,
}

/// Extra joint between any two bodies, given in world coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointConfig {
    pub name: String,
    pub kind: JointKind,
    pub parent: String,
    pub child: String,
    pub origin: Vec3,
    #[serde(default = "unit_z")]
    pub axis: Vec3,
    #[serde(default)]
    pub limits: Option<[f64; 2]>,
}

fn unit_z() -> Vec3 {
    Vec3::z()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduledCommand {
    /// Joint name (with robot prefix).
    pub joint: String,
    pub mode: MotorMode,
    pub target: f64,
}

/// Commands held over the steps `[from, to)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduleSegment {
    pub from: usize,
    pub to: usize,
    pub commands: Vec<ScheduledCommand>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct OutputConfig {
    pub trajectory: Option<PathBuf>,
    pub obj_dir: Option<PathBuf>,
    /// Write OBJ frames every this many steps.
    pub obj_every: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct SceneConfig {
    pub params: SolverParams,
    pub robots: Vec<RobotConfig>,
    pub props: Vec<PropConfig>,
    pub joints: Vec<JointConfig>,
    pub schedule: Vec<ScheduleSegment>,
    /// Motors come from an external controller rather than `schedule`.
    pub external_control: bool,
    pub steps: usize,
    pub seed: u64,
    pub output: OutputConfig,
    /// Body-name pairs whose contact is ignored.
    pub disable_contact: Vec<[String; 2]>,
}

impl SceneConfig {
    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scene config serializes")
    }
}
