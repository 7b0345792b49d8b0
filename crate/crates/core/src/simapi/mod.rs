//! Stepping API: headless runs, validation scenes, the peg-in-hole
//! environment and its line-delimited JSON protocol.

pub mod env;
pub mod protocol;
mod trajectory;
pub mod validation;

pub use trajectory::{run_headless, run_with, write_frame, ReportSummary, RunError, TrajectoryHeader, TrajectoryRecord};

/// Gantry gripper used by the built-in scenes.
pub const GANTRY_GRIPPER_URDF: &str = include_str!("../../assets/urdf/gantry_gripper.urdf");
