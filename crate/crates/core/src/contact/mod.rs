//! Barrier contact, lagged friction and adaptive barrier stiffness.

mod barrier;
mod friction;
mod pairs;

pub use barrier::{barrier, barrier_sq};
pub use friction::{build_anchors, friction_element, friction_elements, friction_mobilizer, FrictionAnchor};
pub use pairs::{
    active_pairs, barrier_element, contact_elements, evaluate_candidate, world_positions, ContactPair, ContactScene,
    stencil_ids, PairKind,
};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::Candidate;

#[derive(Debug, Error, PartialEq)]
pub enum ContactError {
    #[error("non-positive contact distance {distance:e}")]
    NonPositiveDistance { distance: f64 },
    #[error("pair {candidate:?} reached non-positive distance {distance:e}")]
    Interpenetration { candidate: Candidate, distance: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BarrierParams {
    pub dhat: f64,
    pub kappa: f64,
    pub kappa_min: f64,
    pub kappa_max: f64,
    pub eps_v: f64,
}

impl Default for BarrierParams {
    fn default() -> Self {
        Self { dhat: 1e-3, kappa: 1e4, kappa_min: 0.0, kappa_max: 1e10, eps_v: 1e-3 }
    }
}

/// Doubles `kappa` when contact got closer than 1% of `d̂`, within
/// `[kappa_min, kappa_max]`.
pub fn update_barrier_stiffness(min_distance: f64, kappa: f64, params: &BarrierParams) -> f64 {
    let next = if min_distance < 1e-2 * params.dhat { 2.0 * kappa } else { kappa };
    next.clamp(params.kappa_min, params.kappa_max)
}

/// Per-pair friction coefficient.
pub fn pair_mu(mu_a: f64, mu_b: f64) -> f64 {
    (mu_a * mu_b).sqrt()
}
