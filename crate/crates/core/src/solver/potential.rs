use nalgebra::DVector;
use nalgebra_sparse::{CooMatrix, CscMatrix};

use super::{SolverError, World};
use crate::articulation::{lateral_penalty_elements, limit_elements, motor_elements, ResolvedMotor};
use crate::assembly::{body_coordinates, Element, Order};
use crate::contact::{contact_elements, friction_elements, FrictionAnchor};
use crate::dynamics::{inertia_energy, orthogonality_energy};
use crate::geometry::Candidate;

/// Quantities frozen for the duration of one time step.
#[derive(Debug, Clone)]
pub struct StepData {
    /// Stacked coordinates at the start of the step.
    pub q_prev: DVector<f64>,
    /// Inertial predictor `x̃` for every dynamic body.
    pub q_tilde: DVector<f64>,
    pub anchors: Vec<FrictionAnchor>,
    pub motors: Vec<ResolvedMotor>,
}

#[derive(Debug, Clone)]
pub struct Evaluation {
    pub energy: f64,
    /// Gradient in the evaluated space; empty for `Order::Value`.
    pub gradient: DVector<f64>,
    pub hessian: Option<CscMatrix<f64>>,
    /// Smallest active contact distance; infinity without contact.
    pub min_distance: f64,
}

/// `E(q) = ½‖q − x̃‖²_M + h² (Ψ + B + D + P)` over the stacked coordinates
/// of one world, and its pullback to the reduced coordinates.
pub struct IncrementalPotential<'a> {
    pub world: &'a World,
    pub step: &'a StepData,
}

impl IncrementalPotential<'_> {
    fn elements(&self, q: &DVector<f64>, candidates: &[Candidate], order: Order) -> Result<(Vec<Element>, f64), SolverError> {
        let world = self.world;
        let params = &world.params;
        let offsets = &world.reduction.offsets;
        let h2 = params.h * params.h;
        let mut out = Vec::new();
        for (body, off) in world.bodies.iter().zip(offsets) {
            let Some(o) = *off else { continue };
            let qb = body_coordinates(q, o);
            let (e, g, hm) = inertia_energy(&qb, &body_coordinates(&self.step.q_tilde, o), &world.masses[o / 12]);
            out.push(Element::body(o, e, &g, Some(&hm), order));
            let (e, g, hm) = orthogonality_energy(&qb, body.kappa_psi, body.mass.volume, true);
            out.push(Element::body(o, e, &g, Some(&hm), order).scaled(h2));
        }
        let scene = world.contact_scene();
        let (contact, min_distance) =
            contact_elements(&scene, q, candidates, &params.barrier, order, params.execution)?;
        out.extend(contact.into_iter().map(|e| e.scaled(h2)));
        let eps = params.barrier.eps_v * params.h;
        out.extend(friction_elements(&self.step.anchors, q, eps, order, params.execution).into_iter().map(|e| e.scaled(h2)));
        out.extend(limit_elements(&world.joints, offsets, q, &params.barrier, order)?.into_iter().map(|e| e.scaled(h2)));
        out.extend(motor_elements(&self.step.motors, &world.joints, offsets, q, order)?.into_iter().map(|e| e.scaled(h2)));
        out.extend(
            lateral_penalty_elements(&world.reduction.penalty_joints, &world.joints, offsets, q, params.kappa_motor, order)?
                .into_iter()
                .map(|e| e.scaled(h2)),
        );
        Ok((out, min_distance))
    }

    /// Energy and derivatives over the full stacked coordinates.
    pub fn evaluate_full(&self, q: &DVector<f64>, candidates: &[Candidate], order: Order) -> Result<Evaluation, SolverError> {
        let n = q.len();
        let (elements, min_distance) = self.elements(q, candidates, order)?;
        let energy: f64 = elements.iter().map(|e| e.energy).sum();
        if !energy.is_finite() {
            return Err(SolverError::NonFinite);
        }
        let mut gradient = DVector::<f64>::zeros(if order == Order::Value { 0 } else { n });
        let mut coo = (order == Order::Hessian).then(|| CooMatrix::new(n, n));
        if order != Order::Value {
            for e in &elements {
                for (a, &i) in e.dofs.iter().enumerate() {
                    gradient[i] += e.grad[a];
                    if let Some(coo) = coo.as_mut() {
                        for (b, &j) in e.dofs.iter().enumerate() {
                            let v = e.hess[(a, b)];
                            if v != 0.0 {
                                coo.push(i, j, v);
                            }
                        }
                    }
                }
            }
            if gradient.iter().any(|v| !v.is_finite()) {
                return Err(SolverError::NonFinite);
            }
        }
        Ok(Evaluation { energy, gradient, hessian: coo.map(|c| CscMatrix::from(&c)), min_distance })
    }

    /// Energy and derivatives over reduced coordinates `y`:
    /// `∇_y = Sᵀ∇_q`, `H_y = Sᵀ H_q S`.
    pub fn evaluate(&self, y: &DVector<f64>, candidates: &[Candidate], order: Order) -> Result<Evaluation, SolverError> {
        let red = &self.world.reduction;
        let mut ev = self.evaluate_full(&red.full(y), candidates, order)?;
        if order != Order::Value {
            ev.gradient = red.s.tr_mul(&ev.gradient);
        }
        if let Some(h) = ev.hessian.take() {
            let hs = &h * &red.s_csc;
            ev.hessian = Some(&self.world.s_transpose * &hs);
        }
        Ok(ev)
    }
}
