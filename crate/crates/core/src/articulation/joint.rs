use std::f64::consts::PI;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::ArticulationError;
use crate::assembly::PointRef;
use crate::dynamics::{affine_map, AffineBody};
use crate::geometry::Vec3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JointKind {
    Fixed,
    Revolute,
    Prismatic,
}

/// A joint between two bodies. Points and directions are stored in the rest
/// space of the body they belong to; at construction the parent and child
/// attachments coincide in world space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointSpec {
    pub name: String,
    pub kind: JointKind,
    pub parent: usize,
    pub child: usize,
    pub origin: Vec3,
    pub axis: Vec3,
    /// Unit vector perpendicular to `axis`.
    pub normal: Vec3,
    pub child_origin: Vec3,
    pub child_axis: Vec3,
    pub child_normal: Vec3,
    /// Lever length for attachment points, motor references and limit chords.
    pub reference_length: f64,
    /// `[lower, upper]` in m (prismatic) or rad (revolute).
    pub limits: Option<[f64; 2]>,
}

fn perpendicular(a: &Vec3) -> Vec3 {
    let k = a.iamin();
    let mut e = Vec3::zeros();
    e[k] = 1.0;
    a.cross(&e).normalize()
}

impl JointSpec {
    /// Builds a joint from a world-space origin and axis under the bodies'
    /// current placement.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        name: impl Into<String>,
        kind: JointKind,
        parent: usize,
        child: usize,
        bodies: &[AffineBody],
        world_origin: Vec3,
        world_axis: Vec3,
        limits: Option<[f64; 2]>,
    ) -> Result<Self, ArticulationError> {
        let name = name.into();
        let invalid = |reason: String| ArticulationError::InvalidJoint { joint: name.clone(), reason };
        let n = world_axis.norm();
        if !(n > 0.0) {
            return Err(invalid("axis has zero length".into()));
        }
        if parent == child || parent >= bodies.len() || child >= bodies.len() {
            return Err(invalid(format!("bad body indices {parent} -> {child}")));
        }
        if bodies[child].is_static && !bodies[parent].is_static {
            return Err(invalid("a static body cannot be the child of a dynamic one".into()));
        }
        if let Some([lo, hi]) = limits {
            if !(lo < hi) {
                return Err(invalid(format!("lower limit {lo} is not below upper limit {hi}")));
            }
            if kind == JointKind::Revolute && hi - lo >= PI {
                return Err(invalid("revolute limit range must be below π".into()));
            }
        }
        let axis_w = world_axis / n;
        let normal_w = perpendicular(&axis_w);
        let (pb, cb) = (&bodies[parent], &bodies[child]);
        let to_rest = |b: &AffineBody, v: &Vec3| {
            (affine_map(&b.q).try_inverse().expect("invertible placement") * v).normalize()
        };
        let (lo, hi) = cb.mesh.bounding_box();
        Ok(Self {
            kind,
            parent,
            child,
            origin: pb.rest_point(&world_origin),
            axis: to_rest(pb, &axis_w),
            normal: to_rest(pb, &normal_w),
            child_origin: cb.rest_point(&world_origin),
            child_axis: to_rest(cb, &axis_w),
            child_normal: to_rest(cb, &normal_w),
            reference_length: (0.5 * (hi - lo).norm()).max(1e-3),
            limits,
            name,
        })
    }

    pub fn binormal(&self) -> Vec3 {
        self.axis.cross(&self.normal)
    }

    pub fn child_binormal(&self) -> Vec3 {
        self.child_axis.cross(&self.child_normal)
    }

    /// Parent/child rest-point pairs tied by exact point connections.
    pub fn connection_points(&self) -> Vec<(Vec3, Vec3)> {
        let l = self.reference_length;
        let (o, c) = (self.origin, self.child_origin);
        match self.kind {
            JointKind::Revolute => vec![(o, c), (o + self.axis * l, c + self.child_axis * l)],
            JointKind::Fixed => vec![
                (o, c),
                (o + self.normal * l, c + self.child_normal * l),
                (o + self.binormal() * l, c + self.child_binormal() * l),
            ],
            JointKind::Prismatic => Vec::new(),
        }
    }

    pub fn parent_point(&self, offsets: &[Option<usize>], rest: Vec3) -> PointRef {
        PointRef::point(offsets[self.parent], rest)
    }

    pub fn child_point(&self, offsets: &[Option<usize>], rest: Vec3) -> PointRef {
        PointRef::point(offsets[self.child], rest)
    }

    /// Current world axis direction (unit).
    pub fn world_axis(&self, offsets: &[Option<usize>], q: &DVector<f64>) -> Vec3 {
        PointRef::direction(offsets[self.parent], self.axis).world(q).normalize()
    }

    /// Raw coordinate: displacement along the axis (prismatic) or the angle
    /// in (−π, π] about it (revolute); 0 in the construction pose.
    pub fn raw_coordinate(&self, offsets: &[Option<usize>], q: &DVector<f64>) -> f64 {
        let a = self.world_axis(offsets, q);
        match self.kind {
            JointKind::Prismatic => {
                let xc = self.child_point(offsets, self.child_origin).world(q);
                let xo = self.parent_point(offsets, self.origin).world(q);
                (xc - xo).dot(&a)
            }
            JointKind::Revolute => {
                let vp = PointRef::direction(offsets[self.parent], self.normal).world(q);
                let vc = PointRef::direction(offsets[self.child], self.child_normal).world(q);
                let vp = vp - a * a.dot(&vp);
                let vc = vc - a * a.dot(&vc);
                a.dot(&vp.cross(&vc)).atan2(vp.dot(&vc))
            }
            JointKind::Fixed => 0.0,
        }
    }

    /// Coordinate unwrapped to the branch nearest `previous`.
    pub fn coordinate(&self, offsets: &[Option<usize>], q: &DVector<f64>, previous: f64) -> f64 {
        let raw = self.raw_coordinate(offsets, q);
        if self.kind != JointKind::Revolute {
            return raw;
        }
        let turns = ((previous - raw) / (2.0 * PI)).round();
        raw + turns * 2.0 * PI
    }

    /// Parent rest point at coordinate `s` along the axis.
    pub fn axis_point(&self, s: f64) -> Vec3 {
        self.origin + self.axis * s
    }

    /// Parent rest point on the reference circle at angle `theta`.
    pub fn circle_point(&self, theta: f64) -> Vec3 {
        let l = self.reference_length;
        self.origin + (self.normal * theta.cos() + self.binormal() * theta.sin()) * l
    }

    /// Child rest point that traces the reference circle.
    pub fn child_circle_point(&self) -> Vec3 {
        self.child_origin + self.child_normal * self.reference_length
    }
}
