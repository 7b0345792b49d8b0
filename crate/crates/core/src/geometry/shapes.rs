//! Procedural meshes used by the built-in scenes and tests.

use std::f64::consts::PI;

use super::{SurfaceMesh, Vec3};

/// Axis-aligned box centred at the origin.
pub fn cuboid(size: Vec3) -> SurfaceMesh {
    let h = size * 0.5;
    let vertices = vec![
        Vec3::new(-h.x, -h.y, -h.z),
        Vec3::new(h.x, -h.y, -h.z),
        Vec3::new(h.x, h.y, -h.z),
        Vec3::new(-h.x, h.y, -h.z),
        Vec3::new(-h.x, -h.y, h.z),
        Vec3::new(h.x, -h.y, h.z),
        Vec3::new(h.x, h.y, h.z),
        Vec3::new(-h.x, h.y, h.z),
    ];
    let triangles = vec![
        [0, 2, 1],
        [0, 3, 2],
        [4, 5, 6],
        [4, 6, 7],
        [0, 1, 5],
        [0, 5, 4],
        [1, 2, 6],
        [1, 6, 5],
        [2, 3, 7],
        [2, 7, 6],
        [3, 0, 4],
        [3, 4, 7],
    ];
    SurfaceMesh::new(vertices, triangles).expect("static cuboid topology")
}

/// Single upward-facing rectangle in the z = 0 plane (two triangles).
pub fn quad(size_x: f64, size_y: f64) -> SurfaceMesh {
    let (hx, hy) = (size_x * 0.5, size_y * 0.5);
    let vertices = vec![
        Vec3::new(-hx, -hy, 0.0),
        Vec3::new(hx, -hy, 0.0),
        Vec3::new(hx, hy, 0.0),
        Vec3::new(-hx, hy, 0.0),
    ];
    SurfaceMesh::new(vertices, vec![[0, 1, 2], [0, 2, 3]]).expect("static quad topology")
}

/// Closed prism around the z axis: a regular `segments`-gon of circumradius
/// `radius`, spanning z in [-height/2, height/2]. `phase` rotates the polygon.
pub fn cylinder(radius: f64, height: f64, segments: usize, phase: f64) -> SurfaceMesh {
    assert!(segments >= 3);
    let hz = height * 0.5;
    let mut vertices = Vec::with_capacity(2 * segments + 2);
    for z in [-hz, hz] {
        for k in 0..segments {
            let a = phase + 2.0 * PI * k as f64 / segments as f64;
            vertices.push(Vec3::new(radius * a.cos(), radius * a.sin(), z));
        }
    }
    let bottom_center = vertices.len();
    vertices.push(Vec3::new(0.0, 0.0, -hz));
    let top_center = vertices.len();
    vertices.push(Vec3::new(0.0, 0.0, hz));

    let mut triangles = Vec::with_capacity(4 * segments);
    for k in 0..segments {
        let k1 = (k + 1) % segments;
        let (b0, b1, t0, t1) = (k, k1, segments + k, segments + k1);
        triangles.push([b0, b1, t1]);
        triangles.push([b0, t1, t0]);
        triangles.push([bottom_center, b1, b0]);
        triangles.push([top_center, t0, t1]);
    }
    SurfaceMesh::new(vertices, triangles).expect("static cylinder topology")
}

/// Extrudes a simple counter-clockwise polygon in the xz plane along y,
/// centred on y = 0 with total thickness `depth`.
pub fn extruded_xz_polygon(outline: &[(f64, f64)], depth: f64) -> SurfaceMesh {
    let n = outline.len();
    let caps = ear_clip(outline);
    let hy = depth * 0.5;
    let mut vertices = Vec::with_capacity(2 * n);
    // Front face at y = -hy, back face at y = +hy.
    for &(x, z) in outline {
        vertices.push(Vec3::new(x, -hy, z));
    }
    for &(x, z) in outline {
        vertices.push(Vec3::new(x, hy, z));
    }
    let mut triangles = Vec::new();
    // The polygon is CCW in (x, z); viewed from -y that is clockwise, so the
    // front cap keeps the order and the back cap flips it.
    for t in &caps {
        triangles.push([t[0], t[1], t[2]]);
        triangles.push([n + t[0], n + t[2], n + t[1]]);
    }
    for k in 0..n {
        let k1 = (k + 1) % n;
        triangles.push([k, n + k, n + k1]);
        triangles.push([k, n + k1, k1]);
    }
    SurfaceMesh::new(vertices, triangles).expect("static extrusion topology")
}

/// Ear clipping for a simple CCW polygon; returns index triples.
pub fn ear_clip(outline: &[(f64, f64)]) -> Vec<[usize; 3]> {
    let cross = |o: (f64, f64), a: (f64, f64), b: (f64, f64)| {
        (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
    };
    let inside = |p: (f64, f64), a, b, c| cross(a, b, p) >= 0.0 && cross(b, c, p) >= 0.0 && cross(c, a, p) >= 0.0;
    let mut idx: Vec<usize> = (0..outline.len()).collect();
    let mut out = Vec::new();
    while idx.len() > 3 {
        let m = idx.len();
        let ear = (0..m).find(|&i| {
            let (ia, ib, ic) = (idx[(i + m - 1) % m], idx[i], idx[(i + 1) % m]);
            let (a, b, c) = (outline[ia], outline[ib], outline[ic]);
            if cross(a, b, c) <= 0.0 {
                return false;
            }
            idx.iter()
                .filter(|&&j| j != ia && j != ib && j != ic)
                .all(|&j| !inside(outline[j], a, b, c))
        });
        let i = ear.expect("polygon must be simple and counter-clockwise");
        out.push([idx[(i + m - 1) % m], idx[i], idx[(i + 1) % m]]);
        idx.remove(i);
    }
    out.push([idx[0], idx[1], idx[2]]);
    out
}

/// Bottom beam of the assembly scene: a `length` x `thickness` x `height`
/// bar (x, y, z) with a centred slot of `slot_width` cut `slot_depth` down
/// from the top. Origin at the bottom centre.
pub fn notched_beam(length: f64, thickness: f64, height: f64, slot_width: f64, slot_depth: f64) -> SurfaceMesh {
    let (hl, hw) = (length * 0.5, slot_width * 0.5);
    let floor = height - slot_depth;
    let outline = [
        (-hl, 0.0),
        (hl, 0.0),
        (hl, height),
        (hw, height),
        (hw, floor),
        (-hw, floor),
        (-hw, height),
        (-hl, height),
    ];
    extruded_xz_polygon(&outline, thickness)
}

/// Open, static receptacle for the peg task: a funnel from `mouth_radius`
/// at `rim + funnel_height` down to `inner_radius` at `rim`, a tube down to
/// z = 0 and a floor. Surfaces face inward; only the cavity side matters.
pub fn funnel_container(
    inner_radius: f64,
    mouth_radius: f64,
    rim: f64,
    funnel_height: f64,
    segments: usize,
    phase: f64,
) -> SurfaceMesh {
    let ring = |r: f64, z: f64| -> Vec<Vec3> {
        (0..segments)
            .map(|k| {
                let a = phase + 2.0 * PI * k as f64 / segments as f64;
                Vec3::new(r * a.cos(), r * a.sin(), z)
            })
            .collect()
    };
    let mut vertices = Vec::new();
    vertices.extend(ring(inner_radius, 0.0));
    vertices.extend(ring(inner_radius, rim));
    vertices.extend(ring(mouth_radius, rim + funnel_height));
    let center = vertices.len();
    vertices.push(Vec3::zeros());
    let mut triangles = Vec::new();
    for band in 0..2 {
        let lo = band * segments;
        let hi = (band + 1) * segments;
        for k in 0..segments {
            let k1 = (k + 1) % segments;
            // Normals point toward the axis.
            triangles.push([lo + k, hi + k1, lo + k1]);
            triangles.push([lo + k, hi + k, hi + k1]);
        }
    }
    for k in 0..segments {
        triangles.push([center, k, (k + 1) % segments]);
    }
    SurfaceMesh::new(vertices, triangles).expect("static container topology")
}

/// Subdivided icosahedron projected to a sphere of the given radius.
pub fn icosphere(radius: f64, subdivisions: usize) -> SurfaceMesh {
    let t = (1.0 + 5f64.sqrt()) / 2.0;
    let mut vertices: Vec<Vec3> = [
        (-1.0, t, 0.0),
        (1.0, t, 0.0),
        (-1.0, -t, 0.0),
        (1.0, -t, 0.0),
        (0.0, -1.0, t),
        (0.0, 1.0, t),
        (0.0, -1.0, -t),
        (0.0, 1.0, -t),
        (t, 0.0, -1.0),
        (t, 0.0, 1.0),
        (-t, 0.0, -1.0),
        (-t, 0.0, 1.0),
    ]
    .iter()
    .map(|&(x, y, z)| Vec3::new(x, y, z).normalize())
    .collect();
    let mut triangles: Vec<[usize; 3]> = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    for _ in 0..subdivisions {
        let mut cache = std::collections::HashMap::new();
        let mut midpoint = |a: usize, b: usize, verts: &mut Vec<Vec3>| -> usize {
            *cache.entry((a.min(b), a.max(b))).or_insert_with(|| {
                verts.push(((verts[a] + verts[b]) * 0.5).normalize());
                verts.len() - 1
            })
        };
        let mut next = Vec::with_capacity(triangles.len() * 4);
        for [a, b, c] in triangles {
            let ab = midpoint(a, b, &mut vertices);
            let bc = midpoint(b, c, &mut vertices);
            let ca = midpoint(c, a, &mut vertices);
            next.extend([[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
        }
        triangles = next;
    }
    let vertices = vertices.into_iter().map(|v| v * radius).collect();
    SurfaceMesh::new(vertices, triangles).expect("static icosphere topology")
}
