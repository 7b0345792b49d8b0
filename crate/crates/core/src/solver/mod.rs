//! Projected Newton minimization of the incremental potential over reduced
//! coordinates, with CCD-filtered backtracking line search.

mod linear;
mod potential;
mod world;

pub use linear::{newton_direction, Direction};
pub use potential::{Evaluation, IncrementalPotential, StepData};
pub use world::{World, WorldSnapshot};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::articulation::{ArticulationError, DEFAULT_KAPPA_MOTOR};
use crate::contact::{BarrierParams, ContactError};
use crate::geometry::{CcdError, CcdParams, Vec3};
use crate::par::Execution;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverParams {
    pub h: f64,
    pub gravity: Vec3,
    pub barrier: BarrierParams,
    /// Newton stops once `‖Δq‖∞ / h` falls below this (m/s scale).
    pub tol_v: f64,
    pub max_iterations: usize,
    pub kappa_motor: f64,
    #[serde(skip)]
    pub ccd: CcdParams,
    /// Reduced systems smaller than this are factorized densely.
    pub dense_threshold: usize,
    pub execution: Execution,
}

impl Default for SolverParams {
    fn default() -> Self {
        Self {
            h: 0.01,
            gravity: Vec3::new(0.0, 0.0, -9.8),
            barrier: BarrierParams::default(),
            tol_v: 1e-3,
            max_iterations: 200,
            kappa_motor: DEFAULT_KAPPA_MOTOR,
            ccd: CcdParams::default(),
            dense_threshold: 200,
            execution: Execution::default(),
        }
    }
}

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("line search stalled at step fraction {alpha:e}: {diagnostic}")]
    Stalled { alpha: f64, diagnostic: String },
    #[error("non-finite energy or gradient")]
    NonFinite,
    #[error(transparent)]
    Contact(#[from] ContactError),
    #[error(transparent)]
    Articulation(#[from] ArticulationError),
    #[error(transparent)]
    Ccd(#[from] CcdError),
    #[error("inconsistent snapshot: {0}")]
    Snapshot(String),
    #[error("initial state is not intersection-free: {0}")]
    InitialContact(String),
}

/// Per-step diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverReport {
    pub iterations: usize,
    pub converged: bool,
    pub gradient_norm: f64,
    pub step_size: f64,
    /// Smallest contact distance at the accepted state; `None` when no
    /// primitive pair is within `d̂`.
    pub min_distance: Option<f64>,
    /// Smallest distance seen at any accepted line-search iterate.
    pub min_iterate_distance: Option<f64>,
    pub wall_time: f64,
    pub warnings: Vec<String>,
    /// Incremental potential at the start and after each accepted step.
    pub energy_history: Vec<f64>,
    pub barrier_stiffness: f64,
}

/// `‖Δ‖∞ / h < tol_v`.
pub fn converged(delta_inf: f64, h: f64, tol_v: f64) -> bool {
    delta_inf / h < tol_v
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn convergence_rule() {
        assert!(converged(0.0, 0.01, 1e-3));
        assert!(converged(1e-6, 0.01, 1e-3));
        assert!(!converged(1e-4, 0.01, 1e-3));
    }
}
