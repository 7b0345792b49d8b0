//! Scene loading: robot descriptions, JSON scene configuration and their
//! instantiation into a [`World`].

mod config;
mod urdf;

pub use config::{JointConfig, OutputConfig, Placement, PropConfig, RobotConfig, ScheduleSegment, ScheduledCommand, SceneConfig, ShapeConfig};
pub use urdf::{parse_urdf, pose, JointDescription, LinkDescription, LinkGeometry, RobotDescription, DEFAULT_DENSITY, DEFAULT_MU};

use std::path::{Path, PathBuf};

use nalgebra::{Isometry3, Point3};
use thiserror::Error;

use crate::articulation::{ArticulationError, JointKind, JointSpec, MotorCommand};
use crate::dynamics::{AffineBody, DynamicsError};
use crate::geometry::{obj::parse_obj, shapes, GeometryError, SurfaceMesh};
use crate::solver::{SolverError, World};

#[derive(Debug, Error)]
pub enum SceneError {
    #[error("robot description: {0}")]
    Urdf(String),
    #[error("joint {joint}: unsupported joint type {kind:?}")]
    UnsupportedJoint { joint: String, kind: String },
    #[error("joint graph has a cycle through link {link}")]
    Cycle { link: String },
    #[error("link {link} has more than one parent joint ({joints:?})")]
    MultipleParents { link: String, joints: [String; 2] },
    #[error("file not found: {}", .0.display())]
    MissingFile(PathBuf),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{}: {source}", path.display())]
    Json { path: PathBuf, source: serde_json::Error },
    #[error("{}: {source}", path.display())]
    Mesh { path: PathBuf, source: GeometryError },
    #[error("body {body}: {source}")]
    Body { body: String, source: DynamicsError },
    #[error("link {0} has no geometry")]
    EmptyLink(String),
    #[error("invalid parameter {name} = {value}")]
    InvalidParameter { name: &'static str, value: f64 },
    #[error("unknown {what} {name:?}")]
    Unknown { what: &'static str, name: String },
    #[error("initial state intersects: {0}")]
    Intersecting(String),
    #[error(transparent)]
    Articulation(#[from] ArticulationError),
    #[error(transparent)]
    Solver(SolverError),
}

impl From<SolverError> for SceneError {
    fn from(e: SolverError) -> Self {
        match e {
            SolverError::InitialContact(msg) => SceneError::Intersecting(msg),
            SolverError::Articulation(a) => SceneError::Articulation(a),
            other => SceneError::Solver(other),
        }
    }
}

/// Schedule segment with joint names resolved to indices.
#[derive(Debug, Clone, PartialEq)]
pub struct ResolvedSegment {
    pub from: usize,
    pub to: usize,
    pub commands: Vec<MotorCommand>,
}

/// An instantiated scene: the world plus its motor schedule.
#[derive(Debug, Clone)]
pub struct Scene {
    pub world: World,
    pub schedule: Vec<ResolvedSegment>,
    pub config: SceneConfig,
    pub base_dir: PathBuf,
}

impl Scene {
    /// Commands active at `step`; later segments override earlier ones on
    /// the same joint.
    pub fn commands_at(&self, step: usize) -> Vec<MotorCommand> {
        let mut out: Vec<MotorCommand> = Vec::new();
        for seg in self.schedule.iter().filter(|s| s.from <= step && step < s.to) {
            for c in &seg.commands {
                match out.iter_mut().find(|o| o.joint == c.joint) {
                    Some(o) => *o = *c,
                    None => out.push(*c),
                }
            }
        }
        out
    }
}

fn read(path: &Path) -> Result<String, SceneError> {
    std::fs::read_to_string(path).map_err(|source| {
        if source.kind() == std::io::ErrorKind::NotFound {
            SceneError::MissingFile(path.to_path_buf())
        } else {
            SceneError::Io { path: path.to_path_buf(), source }
        }
    })
}

fn load_obj(path: &Path) -> Result<SurfaceMesh, SceneError> {
    parse_obj(&read(path)?).map_err(|source| SceneError::Mesh { path: path.to_path_buf(), source })
}

fn transformed(mesh: &SurfaceMesh, iso: &Isometry3<f64>) -> SurfaceMesh {
    mesh.map_vertices(|v| (iso * Point3::from(*v)).coords)
}

/// Builds a shape mesh in its local frame.
pub fn shape_mesh(shape: &ShapeConfig, base: &Path) -> Result<SurfaceMesh, SceneError> {
    Ok(match shape {
        ShapeConfig::Box { size } => shapes::cuboid(*size),
        ShapeConfig::Cylinder { radius, height, segments, phase } => shapes::cylinder(*radius, *height, *segments, *phase),
        ShapeConfig::Icosphere { radius, subdivisions } => shapes::icosphere(*radius, *subdivisions),
        ShapeConfig::NotchedBeam { length, thickness, height, slot_width, slot_depth } => {
            shapes::notched_beam(*length, *thickness, *height, *slot_width, *slot_depth)
        }
        ShapeConfig::Funnel { inner_radius, mouth_radius, rim, funnel_height, segments, phase } => {
            shapes::funnel_container(*inner_radius, *mouth_radius, *rim, *funnel_height, *segments, *phase)
        }
        ShapeConfig::Mesh { path, scale } => {
            load_obj(&base.join(path))?.map_vertices(|v| v.component_mul(scale))
        }
    })
}

fn link_mesh(link: &LinkDescription, frame: &Isometry3<f64>) -> Result<SurfaceMesh, SceneError> {
    let mut parts = Vec::new();
    for (placement, g) in &link.geometry {
        let local = match g {
            LinkGeometry::Box { size } => shapes::cuboid(*size),
            LinkGeometry::Mesh { path, scale } => load_obj(path)?.map_vertices(|v| v.component_mul(scale)),
        };
        parts.push(transformed(&local, &(frame * placement)));
    }
    if parts.is_empty() {
        return Err(SceneError::EmptyLink(link.name.clone()));
    }
    SurfaceMesh::merge(&parts).map_err(|source| SceneError::Mesh { path: PathBuf::from(&link.name), source })
}

fn check_params(config: &SceneConfig) -> Result<(), SceneError> {
    let p = &config.params;
    for (name, value) in [
        ("h", p.h),
        ("dhat", p.barrier.dhat),
        ("kappa", p.barrier.kappa),
        ("eps_v", p.barrier.eps_v),
        ("tol_v", p.tol_v),
        ("kappa_motor", p.kappa_motor),
    ] {
        if !(value > 0.0 && value.is_finite()) {
            return Err(SceneError::InvalidParameter { name, value });
        }
    }
    if p.max_iterations == 0 {
        return Err(SceneError::InvalidParameter { name: "max_iterations", value: 0.0 });
    }
    Ok(())
}

/// Instantiates a parsed configuration; relative paths resolve against `base`.
pub fn instantiate(config: SceneConfig, base: &Path) -> Result<Scene, SceneError> {
    check_params(&config)?;
    let mut bodies: Vec<AffineBody> = Vec::new();
    let mut joints: Vec<JointSpec> = Vec::new();
    let body_err = |body: &str| {
        let body = body.to_string();
        move |source| SceneError::Body { body, source }
    };

    for rc in &config.robots {
        let desc = match (&rc.urdf_text, &rc.urdf) {
            (Some(text), _) => parse_urdf(text, base)?,
            (None, Some(rel)) => {
                let path = base.join(rel);
                parse_urdf(&read(&path)?, path.parent().unwrap_or(base))?
            }
            (None, None) => return Err(SceneError::Urdf("robot entry needs `urdf` or `urdf_text`".into())),
        };
        for name in rc.initial_positions.keys() {
            if desc.joint(name).is_none() {
                return Err(SceneError::Unknown { what: "joint", name: name.clone() });
            }
        }
        let initial = |j: &str| rc.initial_positions.get(j).copied().unwrap_or(0.0);
        let name = |n: &str| match &rc.prefix {
            Some(p) => format!("{p}/{n}"),
            None => n.to_string(),
        };
        let root = pose(rc.placement.position, rc.placement.rpy);
        let poses = desc.link_poses_at(initial);
        let first = bodies.len();
        for (link_name, link_pose) in &poses {
            let link = desc.link(link_name).expect("pose of a known link");
            let frame = root * link_pose;
            let mesh = link_mesh(link, &frame)?;
            let mu = rc.mu.unwrap_or(link.mu);
            let mut body = if rc.fixed_base && *link_name == desc.root {
                AffineBody::fixed(name(link_name), &mesh, mu)
            } else {
                let density = link.density * rc.density_scale.unwrap_or(1.0);
                AffineBody::dynamic(name(link_name), &mesh, density, mu).map_err(body_err(link_name))?
            };
            body.collide = link.collide;
            bodies.push(body);
        }
        let index = |l: &str| first + poses.iter().position(|(n, _)| n == l).expect("link in tree");
        for (link_name, link_pose) in &poses {
            let Some(j) = desc.joints.iter().find(|j| j.child == *link_name) else { continue };
            let frame = root * link_pose;
            let origin = frame.translation.vector;
            let axis = frame.rotation * j.axis;
            let parent = index(&j.parent);
            let s0 = initial(&j.name);
            let limits = j.limits.map(|[lo, hi]| [lo - s0, hi - s0]);
            // The joint frame is the child frame undone by the joint motion.
            let origin = match j.kind {
                JointKind::Prismatic => origin - axis * s0,
                _ => origin,
            };
            joints.push(JointSpec::new(name(&j.name), j.kind, parent, index(link_name), &bodies, origin, axis, limits)?);
        }
    }

    for prop in &config.props {
        let local = shape_mesh(&prop.shape, base)?;
        let mesh = transformed(&local, &pose(prop.placement.position, prop.placement.rpy));
        let mu = prop.mu.unwrap_or(DEFAULT_MU);
        let mut body = if prop.is_static {
            AffineBody::fixed(prop.name.clone(), &mesh, mu)
        } else {
            let mut b = AffineBody::dynamic(prop.name.clone(), &mesh, prop.density.unwrap_or(DEFAULT_DENSITY), mu)
                .map_err(body_err(&prop.name))?;
            b.qdot.fixed_rows_mut::<3>(0).copy_from(&prop.velocity);
            b
        };
        body.collide = prop.collide;
        bodies.push(body);
    }

    let find_body = |bodies: &[AffineBody], n: &str| {
        bodies
            .iter()
            .position(|b| b.name == n)
            .ok_or_else(|| SceneError::Unknown { what: "body", name: n.to_string() })
    };
    for jc in &config.joints {
        let (parent, child) = (find_body(&bodies, &jc.parent)?, find_body(&bodies, &jc.child)?);
        joints.push(JointSpec::new(jc.name.clone(), jc.kind, parent, child, &bodies, jc.origin, jc.axis, jc.limits)?);
    }

    let disabled = config
        .disable_contact
        .iter()
        .map(|[a, b]| Ok([find_body(&bodies, a)?, find_body(&bodies, b)?]))
        .collect::<Result<Vec<_>, SceneError>>()?;

    let schedule = config
        .schedule
        .iter()
        .map(|seg| {
            let commands = seg
                .commands
                .iter()
                .map(|c| {
                    let joint = joints
                        .iter()
                        .position(|j| j.name == c.joint)
                        .ok_or_else(|| SceneError::Unknown { what: "joint", name: c.joint.clone() })?;
                    Ok(MotorCommand { joint, mode: c.mode, target: c.target })
                })
                .collect::<Result<Vec<_>, SceneError>>()?;
            Ok(ResolvedSegment { from: seg.from, to: seg.to, commands })
        })
        .collect::<Result<Vec<_>, SceneError>>()?;

    let world = World::with_disabled_contacts(bodies, joints, config.params, &disabled)?;
    Ok(Scene { world, schedule, config, base_dir: base.to_path_buf() })
}

/// Reads a scene file without instantiating it.
pub fn read_scene_config(path: &Path) -> Result<SceneConfig, SceneError> {
    let text = read(path)?;
    SceneConfig::from_json(&text).map_err(|source| SceneError::Json { path: path.to_path_buf(), source })
}

/// Reads and instantiates a scene file.
pub fn load_scene(path: &Path) -> Result<Scene, SceneError> {
    instantiate(read_scene_config(path)?, path.parent().unwrap_or(Path::new(".")))
}
