//! Surface meshes, primitive distances, broadphase culling and linear CCD.

mod broadphase;
mod ccd;
pub mod distance;
mod mesh;
pub mod narrowphase;
pub mod obj;
pub mod shapes;

pub use broadphase::{broadphase, Aabb, Candidate, CandidateKind, SweptMesh};
pub use ccd::{ccd_toi, CcdError, CcdParams};
pub use distance::{
    edge_edge_distance_sq, point_edge_distance_sq, point_triangle_distance_sq, segment_intersects_triangle,
    DistanceError, EdgeEdgeDistance, EdgeEdgeRegion, PointTriangleDistance, PointTriangleRegion,
};
pub use mesh::SurfaceMesh;

use thiserror::Error;

pub type Vec3 = nalgebra::Vector3<f64>;

/// Area/length-squared threshold below which a primitive is degenerate.
pub const DEGENERATE_EPS: f64 = 1e-12;

#[derive(Debug, Error, PartialEq)]
pub enum GeometryError {
    #[error("triangle {triangle} references a vertex outside 0..{vertices}")]
    InvalidIndex { triangle: usize, vertices: usize },
    #[error("triangle {triangle} repeats a vertex index")]
    RepeatedIndex { triangle: usize },
    #[error("OBJ line {line}: {message}")]
    Obj { line: usize, message: String },
}
