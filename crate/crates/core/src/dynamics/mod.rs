//! Affine bodies: generalized mass, inertia and orthogonality potentials,
//! and generalized forces.

mod body;
mod energy;
mod mass;

pub use body::AffineBody;
pub use energy::{inertia_energy, orthogonality_energy, predictor};
pub use mass::{compute_mass_properties, MassProperties};

use nalgebra::{Matrix3, SMatrix, SVector};
use thiserror::Error;

use crate::geometry::Vec3;

pub type Vec12 = SVector<f64, 12>;
pub type Mat12 = SMatrix<f64, 12, 12>;
pub type Jacobian = SMatrix<f64, 3, 12>;

/// Default orthogonality stiffness.
pub const DEFAULT_KAPPA_PSI: f64 = 1e8;

#[derive(Debug, Error, PartialEq)]
pub enum DynamicsError {
    #[error("mesh is not closed and consistently oriented")]
    OpenMesh,
    #[error("surface flux residual {residual:e} is too large for a closed mesh")]
    FluxResidual { residual: f64 },
    #[error("mesh encloses negative volume {volume:e}; flip the triangle winding so normals point outward")]
    NegativeVolume { volume: f64 },
    #[error("density must be positive, got {0}")]
    Density(f64),
}

/// Linear map stored row-major in `q[3..12]`.
pub fn affine_map(q: &Vec12) -> Matrix3<f64> {
    Matrix3::from_row_slice(&q.as_slice()[3..12])
}

pub fn translation(q: &Vec12) -> Vec3 {
    Vec3::new(q[0], q[1], q[2])
}

/// `x = p + A X`.
pub fn world_point(q: &Vec12, rest: &Vec3) -> Vec3 {
    translation(q) + affine_map(q) * rest
}

/// ∂x/∂q for the rest point `X`.
pub fn point_jacobian(rest: &Vec3) -> Jacobian {
    let mut j = Jacobian::zeros();
    for i in 0..3 {
        j[(i, i)] = 1.0;
        for k in 0..3 {
            j[(i, 3 + 3 * i + k)] = rest[k];
        }
    }
    j
}

/// Coordinates of the identity placement translated to `p`.
pub fn identity_coordinates(p: &Vec3) -> Vec12 {
    let mut q = Vec12::zeros();
    q.fixed_rows_mut::<3>(0).copy_from(p);
    q[3] = 1.0;
    q[7] = 1.0;
    q[11] = 1.0;
    q
}
