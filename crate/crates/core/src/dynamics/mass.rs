use nalgebra::Matrix3;
use serde::{Deserialize, Serialize};

use super::{DynamicsError, Mat12};
use crate::geometry::{SurfaceMesh, Vec3};

/// Volume integrals of a solid bounded by a closed surface.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MassProperties {
    pub volume: f64,
    /// ∫ρ dV
    pub mass: f64,
    /// ∫ρX dV
    pub first_moment: Vec3,
    /// ∫ρXXᵀ dV
    pub second_moment: Matrix3<f64>,
}

impl MassProperties {
    pub fn center_of_mass(&self) -> Vec3 {
        self.first_moment / self.mass
    }

    /// Same integrals for the body re-expressed in coordinates `X' = X - c`.
    pub fn shifted(&self, c: &Vec3) -> Self {
        let s = self.first_moment;
        Self {
            volume: self.volume,
            mass: self.mass,
            first_moment: s - self.mass * c,
            second_moment: self.second_moment - s * c.transpose() - c * s.transpose() + self.mass * c * c.transpose(),
        }
    }

    /// 12×12 mass matrix for `q = [p, A row-major]` with `x = p + A X`.
    pub fn generalized_mass(&self) -> Mat12 {
        let mut m = Mat12::zeros();
        for i in 0..3 {
            m[(i, i)] = self.mass;
            for j in 0..3 {
                let a = 3 + 3 * i + j;
                m[(i, a)] = self.first_moment[j];
                m[(a, i)] = self.first_moment[j];
                for l in 0..3 {
                    m[(a, 3 + 3 * i + l)] = self.second_moment[(j, l)];
                }
            }
        }
        m
    }
}

/// Exact mass properties by a signed tetrahedron fan over the surface.
pub fn compute_mass_properties(mesh: &SurfaceMesh, density: f64) -> Result<MassProperties, DynamicsError> {
    if !mesh.is_closed_and_oriented() {
        return Err(DynamicsError::OpenMesh);
    }
    let verts = mesh.vertices();
    // Fan apex at the vertex centroid keeps the sums well conditioned far from the origin.
    let r = verts.iter().sum::<Vec3>() / verts.len() as f64;
    let mut flux = Vec3::zeros();
    let mut area = 0.0;
    let mut vol = 0.0;
    let mut first = Vec3::zeros();
    let mut second = Matrix3::zeros();
    for t in mesh.triangles() {
        let [a, b, c] = t.map(|i| verts[i] - r);
        let n = (b - a).cross(&(c - a));
        flux += n * 0.5;
        area += n.norm() * 0.5;
        let v = a.dot(&b.cross(&c)) / 6.0;
        vol += v;
        let sum = a + b + c;
        first += v * sum / 4.0;
        second += v / 20.0 * (a * a.transpose() + b * b.transpose() + c * c.transpose() + sum * sum.transpose());
    }
    if flux.norm() > 1e-8 * area.max(vol.abs().powf(2.0 / 3.0)) {
        return Err(DynamicsError::FluxResidual { residual: flux.norm() });
    }
    if vol <= 0.0 {
        return Err(DynamicsError::NegativeVolume { volume: vol });
    }
    let local = MassProperties {
        volume: vol,
        mass: density * vol,
        first_moment: density * first,
        second_moment: density * second,
    };
    Ok(local.shifted(&-r))
}
