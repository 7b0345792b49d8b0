use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::{SurfaceMesh, Vec3};
use crate::par::{self, Execution};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aabb {
    pub min: Vec3,
    pub max: Vec3,
}

impl Aabb {
    pub fn empty() -> Self {
        Self { min: Vec3::repeat(f64::INFINITY), max: Vec3::repeat(f64::NEG_INFINITY) }
    }

    pub fn from_points<'a>(points: impl IntoIterator<Item = &'a Vec3>) -> Self {
        points.into_iter().fold(Self::empty(), |b, p| b.include(p))
    }

    pub fn include(self, p: &Vec3) -> Self {
        Self { min: self.min.inf(p), max: self.max.sup(p) }
    }

    pub fn inflate(self, r: f64) -> Self {
        Self { min: self.min.add_scalar(-r), max: self.max.add_scalar(r) }
    }

    pub fn overlaps(&self, other: &Aabb) -> bool {
        (0..3).all(|k| self.min[k] <= other.max[k] && other.min[k] <= self.max[k])
    }

    /// Squared length of the gap between two boxes; 0 when they overlap.
    pub fn distance_sq(&self, other: &Aabb) -> f64 {
        (0..3).map(|k| (self.min[k] - other.max[k]).max(other.min[k] - self.max[k]).max(0.0).powi(2)).sum()
    }

    pub fn diagonal(&self) -> f64 {
        (self.max - self.min).norm()
    }
}

const MAX_CELL_SPAN: i64 = 64;
const MAX_CELLS_PER_ENTRY: i64 = 512;

/// One body's surface at the start and end of a linear sweep.
#[derive(Debug, Clone, Copy)]
pub struct SweptMesh<'a> {
    pub body: usize,
    pub mesh: &'a SurfaceMesh,
    pub start: &'a [Vec3],
    pub end: &'a [Vec3],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum CandidateKind {
    /// `prim_a` is a vertex of `body_a`, `prim_b` a triangle of `body_b`.
    PointTriangle,
    /// `prim_a`, `prim_b` are edges.
    EdgeEdge,
}

/// A primitive pair that may come within the inflation distance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Candidate {
    pub kind: CandidateKind,
    pub body_a: usize,
    pub prim_a: usize,
    pub body_b: usize,
    pub prim_b: usize,
}

#[derive(Clone, Copy)]
enum Prim {
    Vertex,
    Edge,
    Triangle,
}

#[derive(Clone, Copy)]
struct Entry {
    mesh: usize,
    prim: usize,
    kind: Prim,
    bounds: Aabb,
}

/// Spatial-hash broadphase over swept, inflated primitive boxes.
///
/// Returns every vertex-triangle and edge-edge pair of distinct bodies whose
/// swept boxes (inflated by `inflation`) overlap and for which
/// `allow(body_a, body_b)` holds. Output is sorted and duplicate-free.
pub fn broadphase(
    meshes: &[SweptMesh<'_>],
    inflation: f64,
    allow: impl Fn(usize, usize) -> bool + Sync,
    exec: Execution,
) -> Vec<Candidate> {
    let swept = |m: &SweptMesh<'_>, ids: &[usize]| {
        Aabb::from_points(ids.iter().flat_map(|&i| [&m.start[i], &m.end[i]])).inflate(inflation)
    };
    let mut entries = Vec::new();
    for (mi, m) in meshes.iter().enumerate() {
        if !meshes.iter().any(|o| o.body != m.body && allow(m.body, o.body)) {
            continue;
        }
        for v in 0..m.mesh.num_vertices() {
            entries.push(Entry { mesh: mi, prim: v, kind: Prim::Vertex, bounds: swept(m, &[v]) });
        }
        for (e, edge) in m.mesh.edges().iter().enumerate() {
            entries.push(Entry { mesh: mi, prim: e, kind: Prim::Edge, bounds: swept(m, edge) });
        }
        for (t, tri) in m.mesh.triangles().iter().enumerate() {
            entries.push(Entry { mesh: mi, prim: t, kind: Prim::Triangle, bounds: swept(m, tri) });
        }
    }
    if entries.is_empty() {
        return Vec::new();
    }

    // Cells follow the typical primitive size; primitives spanning many
    // cells (large static faces, long sweeps) are tested against everything.
    let mut diagonals: Vec<f64> = entries.iter().map(|e| e.bounds.diagonal()).collect();
    let mid = diagonals.len() / 2;
    let cell = 2.0 * *diagonals.select_nth_unstable_by(mid, f64::total_cmp).1;
    let cell = if cell > 0.0 { cell } else { 1.0 };
    let key = |x: f64| (x / cell).floor() as i64;
    let mut grid: HashMap<[i64; 3], Vec<usize>> = HashMap::new();
    let mut large = Vec::new();
    for (idx, e) in entries.iter().enumerate() {
        let lo = e.bounds.min.map(key);
        let hi = e.bounds.max.map(key);
        let span = (hi - lo).map(|d| d.saturating_add(1));
        if span.iter().any(|&d| d > MAX_CELL_SPAN) || span.x * span.y * span.z > MAX_CELLS_PER_ENTRY {
            large.push(idx);
            continue;
        }
        for i in lo.x..=hi.x {
            for j in lo.y..=hi.y {
                for k in lo.z..=hi.z {
                    grid.entry([i, j, k]).or_default().push(idx);
                }
            }
        }
    }
    let mut cells: Vec<([i64; 3], Vec<usize>)> = grid.into_iter().collect();
    cells.sort_unstable_by_key(|(k, _)| *k);

    let test = |i: usize, j: usize, found: &mut Vec<Candidate>| {
        let (a, b) = (&entries[i], &entries[j]);
        let (ba, bb) = (meshes[a.mesh].body, meshes[b.mesh].body);
        if ba == bb || !allow(ba, bb) || !a.bounds.overlaps(&b.bounds) {
            return;
        }
        let cand = |kind, x: &Entry, y: &Entry| Candidate {
            kind,
            body_a: meshes[x.mesh].body,
            prim_a: x.prim,
            body_b: meshes[y.mesh].body,
            prim_b: y.prim,
        };
        match (a.kind, b.kind) {
            (Prim::Vertex, Prim::Triangle) => found.push(cand(CandidateKind::PointTriangle, a, b)),
            (Prim::Triangle, Prim::Vertex) => found.push(cand(CandidateKind::PointTriangle, b, a)),
            (Prim::Edge, Prim::Edge) => {
                let (x, y) = if (ba, a.prim) <= (bb, b.prim) { (a, b) } else { (b, a) };
                found.push(cand(CandidateKind::EdgeEdge, x, y));
            }
            _ => {}
        }
    };
    let mut per_cell = par::map(exec, &cells, |(_, members)| {
        let mut found = Vec::new();
        for (ii, &i) in members.iter().enumerate() {
            for &j in &members[ii + 1..] {
                test(i, j, &mut found);
            }
        }
        found
    });
    let is_large = {
        let mut flags = vec![false; entries.len()];
        large.iter().for_each(|&i| flags[i] = true);
        flags
    };
    per_cell.extend(par::map(exec, &large, |&i| {
        let mut found = Vec::new();
        for j in 0..entries.len() {
            if !is_large[j] || j > i {
                test(i, j, &mut found);
            }
        }
        found
    }));
    let mut out: Vec<Candidate> = per_cell.into_iter().flatten().collect();
    out.sort_unstable();
    out.dedup();
    out
}
