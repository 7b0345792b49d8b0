use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::articulation::MotorCommand;
use crate::geometry::obj::write_obj;
use crate::scene::{Scene, SceneError};
use crate::solver::{SolverError, SolverReport, World};

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Scene(#[from] SceneError),
    #[error("step {step}: {source}")]
    Solver { step: usize, source: SolverError },
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
}

/// Condensed solver report stored with each record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportSummary {
    pub iterations: usize,
    pub converged: bool,
    pub gradient_norm: f64,
    pub step_size: f64,
    pub wall_time: f64,
    pub barrier_stiffness: f64,
    pub warnings: Vec<String>,
}

impl From<&SolverReport> for ReportSummary {
    fn from(r: &SolverReport) -> Self {
        Self {
            iterations: r.iterations,
            converged: r.converged,
            gradient_norm: r.gradient_norm,
            step_size: r.step_size,
            wall_time: r.wall_time,
            barrier_stiffness: r.barrier_stiffness,
            warnings: r.warnings.clone(),
        }
    }
}

/// One completed step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub step: usize,
    pub time: f64,
    /// 12 coordinates per body, in body order (static bodies included).
    pub bodies: Vec<Vec<f64>>,
    pub joints: Vec<f64>,
    pub report: ReportSummary,
    /// Exact minimum distance over all contact-enabled body pairs; `None`
    /// when the scene has no such pair.
    pub min_contact_distance: Option<f64>,
}

impl TrajectoryRecord {
    pub fn capture(world: &World, report: &SolverReport) -> Self {
        Self {
            step: world.steps,
            time: world.time,
            bodies: world.bodies.iter().map(|b| b.q.as_slice().to_vec()).collect(),
            joints: world.joint_coordinates.clone(),
            report: report.into(),
            min_contact_distance: Some(world.min_separation()).filter(|d| d.is_finite()),
        }
    }
}

/// First line of a trajectory file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryHeader {
    pub bodies: Vec<String>,
    pub joints: Vec<String>,
    pub params: crate::solver::SolverParams,
    /// Free-form metadata such as environment constants.
    #[serde(default)]
    pub meta: serde_json::Value,
}

impl TrajectoryHeader {
    pub fn new(world: &World, meta: serde_json::Value) -> Self {
        Self {
            bodies: world.bodies.iter().map(|b| b.name.clone()).collect(),
            joints: world.joints.iter().map(|j| j.name.clone()).collect(),
            params: world.params,
            meta,
        }
    }
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> RunError + '_ {
    move |source| RunError::Io { path: path.to_path_buf(), source }
}

/// Writes the world surface as one OBJ file.
pub fn write_frame(world: &World, path: &Path) -> Result<(), RunError> {
    let q = world.full_q();
    let positions = world.positions(&q);
    let mut out = String::new();
    let mut base = 0;
    for (b, verts) in world.bodies.iter().zip(&positions) {
        out.push_str(&format!("o {}\n", b.name));
        let text = write_obj(&b.mesh, verts);
        for line in text.lines() {
            if let Some(rest) = line.strip_prefix("f ") {
                let idx: Vec<usize> = rest.split_whitespace().filter_map(|t| t.parse().ok()).collect();
                out.push_str(&format!("f {} {} {}\n", idx[0] + base, idx[1] + base, idx[2] + base));
            } else {
                out.push_str(line);
                out.push('\n');
            }
        }
        base += verts.len();
    }
    std::fs::write(path, out).map_err(io_err(path))
}

/// Runs a scene's motor schedule for `steps` steps, streaming records to
/// `sink` (one JSON object per line, after a header line) and optionally
/// dumping OBJ frames.
pub fn run_headless(
    scene: &mut Scene,
    steps: usize,
    sink: Option<&mut dyn Write>,
    obj_dir: Option<(&Path, usize)>,
) -> Result<Vec<TrajectoryRecord>, RunError> {
    run_with(scene, steps, sink, obj_dir, |scene, step| scene.commands_at(step))
}

/// Like [`run_headless`] with commands supplied by a callback.
pub fn run_with(
    scene: &mut Scene,
    steps: usize,
    mut sink: Option<&mut dyn Write>,
    obj_dir: Option<(&Path, usize)>,
    mut commands: impl FnMut(&Scene, usize) -> Vec<MotorCommand>,
) -> Result<Vec<TrajectoryRecord>, RunError> {
    let sink_path = PathBuf::from("<trajectory>");
    if let Some(w) = sink.as_deref_mut() {
        let header = TrajectoryHeader::new(&scene.world, serde_json::json!({ "steps": steps }));
        writeln!(w, "{}", serde_json::to_string(&header).expect("header serializes")).map_err(io_err(&sink_path))?;
    }
    if let Some((dir, _)) = obj_dir {
        std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    let mut records = Vec::with_capacity(steps);
    for step in 0..steps {
        let cmds = commands(scene, step);
        let report = scene.world.step(&cmds).map_err(|source| RunError::Solver { step, source })?;
        let record = TrajectoryRecord::capture(&scene.world, &report);
        if let Some(w) = sink.as_deref_mut() {
            writeln!(w, "{}", serde_json::to_string(&record).expect("record serializes")).map_err(io_err(&sink_path))?;
        }
        if let Some((dir, every)) = obj_dir {
            if every > 0 && (step + 1) % every == 0 {
                write_frame(&scene.world, &dir.join(format!("frame_{:05}.obj", step + 1)))?;
            }
        }
        records.push(record);
    }
    Ok(records)
}
