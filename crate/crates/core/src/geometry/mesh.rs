use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{GeometryError, Vec3};

/// Triangle surface mesh with derived unique edges.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurfaceMesh {
    vertices: Vec<Vec3>,
    triangles: Vec<[usize; 3]>,
    edges: Vec<[usize; 2]>,
}

impl SurfaceMesh {
    pub fn new(vertices: Vec<Vec3>, triangles: Vec<[usize; 3]>) -> Result<Self, GeometryError> {
        let n = vertices.len();
        for (t, tri) in triangles.iter().enumerate() {
            if tri.iter().any(|&i| i >= n) {
                return Err(GeometryError::InvalidIndex { triangle: t, vertices: n });
            }
            if tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2] {
                return Err(GeometryError::RepeatedIndex { triangle: t });
            }
        }
        let edges = unique_edges(&triangles);
        Ok(Self { vertices, triangles, edges })
    }

    pub fn vertices(&self) -> &[Vec3] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn edges(&self) -> &[[usize; 2]] {
        &self.edges
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_triangles(&self) -> usize {
        self.triangles.len()
    }

    /// Returns a copy with every vertex mapped through `f`.
    pub fn map_vertices(&self, f: impl Fn(&Vec3) -> Vec3) -> Self {
        Self {
            vertices: self.vertices.iter().map(f).collect(),
            triangles: self.triangles.clone(),
            edges: self.edges.clone(),
        }
    }

    /// True when every undirected edge is shared by exactly two triangles that
    /// traverse it in opposite directions (closed, consistently oriented).
    pub fn is_closed_and_oriented(&self) -> bool {
        let mut directed: BTreeMap<(usize, usize), usize> = BTreeMap::new();
        for tri in &self.triangles {
            for k in 0..3 {
                *directed.entry((tri[k], tri[(k + 1) % 3])).or_default() += 1;
            }
        }
        directed
            .iter()
            .all(|(&(a, b), &count)| count == 1 && directed.get(&(b, a)) == Some(&1))
    }

    pub fn bounding_box(&self) -> (Vec3, Vec3) {
        let mut lo = Vec3::repeat(f64::INFINITY);
        let mut hi = Vec3::repeat(f64::NEG_INFINITY);
        for v in &self.vertices {
            lo = lo.inf(v);
            hi = hi.sup(v);
        }
        (lo, hi)
    }

    /// Concatenates several meshes into one (indices shifted).
    pub fn merge(parts: &[SurfaceMesh]) -> Result<Self, GeometryError> {
        let mut vertices = Vec::new();
        let mut triangles = Vec::new();
        for part in parts {
            let base = vertices.len();
            vertices.extend_from_slice(&part.vertices);
            triangles.extend(part.triangles.iter().map(|t| [t[0] + base, t[1] + base, t[2] + base]));
        }
        Self::new(vertices, triangles)
    }
}

fn unique_edges(triangles: &[[usize; 3]]) -> Vec<[usize; 2]> {
    let mut set = BTreeSet::new();
    for tri in triangles {
        for k in 0..3 {
            let (a, b) = (tri[k], tri[(k + 1) % 3]);
            set.insert([a.min(b), a.max(b)]);
        }
    }
    set.into_iter().collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::shapes;

    #[test]
    fn cube_edges_are_unique() {
        let cube = shapes::cuboid(Vec3::new(1.0, 1.0, 1.0));
        assert_eq!(cube.num_vertices(), 8);
        assert_eq!(cube.num_triangles(), 12);
        assert_eq!(cube.edges().len(), 18);
        let set: BTreeSet<_> = cube.edges().iter().collect();
        assert_eq!(set.len(), cube.edges().len());
        assert!(cube.is_closed_and_oriented());
    }

    #[test]
    fn rejects_bad_index() {
        let err = SurfaceMesh::new(vec![Vec3::zeros(); 2], vec![[0, 1, 2]]).unwrap_err();
        assert!(matches!(err, GeometryError::InvalidIndex { .. }));
    }

    #[test]
    fn open_mesh_detected() {
        let quad = shapes::quad(2.0, 2.0);
        assert!(!quad.is_closed_and_oriented());
    }
}
