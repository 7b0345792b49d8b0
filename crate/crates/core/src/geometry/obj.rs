//! Minimal Wavefront OBJ reader/writer (positions and triangular faces).

use std::fmt::Write as _;

use super::{GeometryError, SurfaceMesh, Vec3};

/// Parses `v` and `f` records. Faces must be triangles; quads and larger
/// polygons are rejected. Texture/normal indices (`1/2/3`) are ignored and
/// negative (relative) indices are supported.
pub fn parse_obj(text: &str) -> Result<SurfaceMesh, GeometryError> {
    let mut vertices = Vec::new();
    let mut triangles = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line_no = lineno + 1;
        let err = |message: String| GeometryError::Obj { line: line_no, message };
        let mut tokens = line.split_whitespace();
        match tokens.next() {
            Some("v") => {
                let coords: Vec<f64> = tokens
                    .take(3)
                    .map(|t| t.parse::<f64>().map_err(|e| err(format!("bad coordinate {t:?}: {e}"))))
                    .collect::<Result<_, _>>()?;
                if coords.len() != 3 {
                    return Err(err("vertex needs three coordinates".into()));
                }
                vertices.push(Vec3::new(coords[0], coords[1], coords[2]));
            }
            Some("f") => {
                let idx: Vec<usize> = tokens
                    .map(|t| {
                        let head = t.split('/').next().unwrap_or("");
                        let raw: i64 = head.parse().map_err(|e| err(format!("bad index {t:?}: {e}")))?;
                        let resolved = if raw < 0 { vertices.len() as i64 + raw } else { raw - 1 };
                        if resolved < 0 {
                            return Err(err(format!("index {raw} out of range")));
                        }
                        Ok(resolved as usize)
                    })
                    .collect::<Result<_, _>>()?;
                if idx.len() != 3 {
                    return Err(err(format!(
                        "face with {} vertices; only triangles are supported (triangulate the mesh)",
                        idx.len()
                    )));
                }
                triangles.push([idx[0], idx[1], idx[2]]);
            }
            _ => {}
        }
    }
    SurfaceMesh::new(vertices, triangles)
}

pub fn write_obj(mesh: &SurfaceMesh, vertices: &[Vec3]) -> String {
    let mut out = String::new();
    for v in vertices {
        let _ = writeln!(out, "v {} {} {}", v.x, v.y, v.z);
    }
    for t in mesh.triangles() {
        let _ = writeln!(out, "f {} {} {}", t[0] + 1, t[1] + 1, t[2] + 1);
    }
    out
}
