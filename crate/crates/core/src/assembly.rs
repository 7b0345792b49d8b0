//! Element contributions and their scatter onto body coordinates.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::dynamics::{affine_map, point_jacobian, translation, Mat12, Vec12};
use crate::geometry::Vec3;

/// How many derivatives an evaluation needs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Order {
    Value,
    Gradient,
    Hessian,
}

/// A material point (or direction, when `translate` is false) of a body
/// expressed through that body's coordinates. `dof` is the offset of the
/// body's 12 coordinates in the stacked vector, `None` for static bodies
/// whose rest space coincides with world space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PointRef {
    pub dof: Option<usize>,
    pub rest: Vec3,
    pub translate: bool,
}

impl PointRef {
    pub fn point(dof: Option<usize>, rest: Vec3) -> Self {
        Self { dof, rest, translate: true }
    }

    pub fn direction(dof: Option<usize>, rest: Vec3) -> Self {
        Self { dof, rest, translate: false }
    }

    pub fn world(&self, q: &DVector<f64>) -> Vec3 {
        match self.dof {
            None => self.rest,
            Some(o) => {
                let qb = body_coordinates(q, o);
                let ax = affine_map(&qb) * self.rest;
                if self.translate {
                    translation(&qb) + ax
                } else {
                    ax
                }
            }
        }
    }

    fn jacobian(&self) -> nalgebra::SMatrix<f64, 3, 12> {
        let mut j = point_jacobian(&self.rest);
        if !self.translate {
            j.fixed_view_mut::<3, 3>(0, 0).fill(0.0);
        }
        j
    }
}

pub fn body_coordinates(q: &DVector<f64>, offset: usize) -> Vec12 {
    Vec12::from_column_slice(&q.as_slice()[offset..offset + 12])
}

/// Energy contribution over a small set of global coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct Element {
    pub energy: f64,
    pub dofs: Vec<usize>,
    pub grad: DVector<f64>,
    pub hess: DMatrix<f64>,
}

impl Element {
    pub fn value(energy: f64) -> Self {
        Self { energy, dofs: Vec::new(), grad: DVector::zeros(0), hess: DMatrix::zeros(0, 0) }
    }

    /// Single-body contribution on `offset..offset + 12`.
    pub fn body(offset: usize, energy: f64, grad: &Vec12, hess: Option<&Mat12>, order: Order) -> Self {
        if order == Order::Value {
            return Self::value(energy);
        }
        Self {
            energy,
            dofs: (offset..offset + 12).collect(),
            grad: DVector::from_column_slice(grad.as_slice()),
            hess: match (order, hess) {
                (Order::Hessian, Some(h)) => DMatrix::from_column_slice(12, 12, h.as_slice()),
                _ => DMatrix::zeros(0, 0),
            },
        }
    }

    /// Pulls a gradient/Hessian over stacked world points (3 per point)
    /// back to the coordinates of the bodies owning those points.
    pub fn scatter(
        energy: f64,
        points: &[PointRef],
        grad: &DVector<f64>,
        hess: Option<&DMatrix<f64>>,
        order: Order,
    ) -> Self {
        if order == Order::Value {
            return Self::value(energy);
        }
        let mut bodies: Vec<usize> = points.iter().filter_map(|p| p.dof).collect();
        bodies.sort_unstable();
        bodies.dedup();
        let n = 12 * bodies.len();
        let slot = |p: &PointRef| p.dof.map(|o| 12 * bodies.binary_search(&o).expect("listed body"));
        let jac: Vec<_> = points.iter().map(|p| p.jacobian()).collect();
        let mut g = DVector::zeros(n);
        for (k, p) in points.iter().enumerate() {
            if let Some(s) = slot(p) {
                let gk = jac[k].transpose() * grad.fixed_rows::<3>(3 * k);
                let mut rows = g.rows_mut(s, 12);
                rows += gk;
            }
        }
        let mut h = DMatrix::zeros(0, 0);
        if let (Order::Hessian, Some(hs)) = (order, hess) {
            h = DMatrix::zeros(n, n);
            for (k, pk) in points.iter().enumerate() {
                let Some(sk) = slot(pk) else { continue };
                for (l, pl) in points.iter().enumerate() {
                    let Some(sl) = slot(pl) else { continue };
                    let block = hs.fixed_view::<3, 3>(3 * k, 3 * l);
                    let jb = jac[k].transpose() * block * jac[l];
                    let mut view = h.view_mut((sk, sl), (12, 12));
                    view += jb;
                }
            }
        }
        let dofs = bodies.iter().flat_map(|&o| o..o + 12).collect();
        Self { energy, dofs, grad: g, hess: h }
    }

    /// Scales energy and derivatives.
    pub fn scaled(mut self, s: f64) -> Self {
        self.energy *= s;
        self.grad *= s;
        self.hess *= s;
        self
    }
}
