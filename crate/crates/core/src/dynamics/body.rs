use serde::{Deserialize, Serialize};

use super::{
    compute_mass_properties, identity_coordinates, point_jacobian, world_point, DynamicsError, Mat12, MassProperties,
    Vec12, DEFAULT_KAPPA_PSI,
};
use crate::geometry::{SurfaceMesh, Vec3};

/// One link or prop. Rest coordinates are world-aligned and, for dynamic
/// bodies, centred on the centre of mass, so a freshly placed body has
/// `q = [com, I]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AffineBody {
    pub name: String,
    pub mesh: SurfaceMesh,
    pub q: Vec12,
    pub qdot: Vec12,
    pub is_static: bool,
    pub density: f64,
    pub kappa_psi: f64,
    pub mu: f64,
    /// Bodies with `collide = false` are skipped by contact detection.
    pub collide: bool,
    pub mass: MassProperties,
}

impl AffineBody {
    /// Dynamic body from a mesh given in world coordinates.
    pub fn dynamic(name: impl Into<String>, world_mesh: &SurfaceMesh, density: f64, mu: f64) -> Result<Self, DynamicsError> {
        if !(density > 0.0) {
            return Err(DynamicsError::Density(density));
        }
        let props = compute_mass_properties(world_mesh, density)?;
        let com = props.center_of_mass();
        Ok(Self {
            name: name.into(),
            mesh: world_mesh.map_vertices(|v| v - com),
            q: identity_coordinates(&com),
            qdot: Vec12::zeros(),
            is_static: false,
            density,
            kappa_psi: DEFAULT_KAPPA_PSI,
            mu,
            collide: true,
            mass: props.shifted(&com),
        })
    }

    /// Immovable body; the mesh may be open. Rest coordinates equal world
    /// coordinates.
    pub fn fixed(name: impl Into<String>, world_mesh: &SurfaceMesh, mu: f64) -> Self {
        let mass = compute_mass_properties(world_mesh, 1.0).unwrap_or(MassProperties {
            volume: 0.0,
            mass: 0.0,
            first_moment: Vec3::zeros(),
            second_moment: nalgebra::Matrix3::zeros(),
        });
        Self {
            name: name.into(),
            mesh: world_mesh.clone(),
            q: identity_coordinates(&Vec3::zeros()),
            qdot: Vec12::zeros(),
            is_static: true,
            density: 0.0,
            kappa_psi: 0.0,
            mu,
            collide: true,
            mass,
        }
    }

    pub fn generalized_mass(&self) -> Mat12 {
        self.mass.generalized_mass()
    }

    pub fn world_vertices(&self) -> Vec<Vec3> {
        self.world_vertices_at(&self.q)
    }

    pub fn world_vertices_at(&self, q: &Vec12) -> Vec<Vec3> {
        self.mesh.vertices().iter().map(|x| world_point(q, x)).collect()
    }

    pub fn center_of_mass(&self) -> Vec3 {
        world_point(&self.q, &self.mass.center_of_mass())
    }

    /// Rest-space coordinates of a world point under the current placement.
    pub fn rest_point(&self, world: &Vec3) -> Vec3 {
        let a = super::affine_map(&self.q);
        a.try_inverse().expect("affine map is invertible") * (world - super::translation(&self.q))
    }

    /// `[m g; g ⊗ ∫ρX]`.
    pub fn gravity_force(&self, g: &Vec3) -> Vec12 {
        let mut f = Vec12::zeros();
        for i in 0..3 {
            f[i] = self.mass.mass * g[i];
            for j in 0..3 {
                f[3 + 3 * i + j] = g[i] * self.mass.first_moment[j];
            }
        }
        f
    }

    /// Generalized force of a world-space force applied at rest point `rest`.
    pub fn point_force(rest: &Vec3, force: &Vec3) -> Vec12 {
        point_jacobian(rest).transpose() * force
    }
}
