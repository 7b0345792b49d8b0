use nalgebra::Matrix3;

use super::{affine_map, Mat12, Vec12};
use crate::linalg::project_psd;

/// `x̃ = q + h q̇ + h² M⁻¹ f`.
pub fn predictor(q: &Vec12, qdot: &Vec12, mass: &Mat12, force: &Vec12, h: f64) -> Vec12 {
    let accel = mass.cholesky().expect("generalized mass is positive definite").solve(force);
    q + qdot * h + accel * (h * h)
}

/// `½ (q − x̃)ᵀ M (q − x̃)` with gradient and (constant) Hessian.
pub fn inertia_energy(q: &Vec12, q_tilde: &Vec12, mass: &Mat12) -> (f64, Vec12, Mat12) {
    let dq = q - q_tilde;
    let g = mass * dq;
    (0.5 * dq.dot(&g), g, *mass)
}

/// `κ V ‖AᵀA − I‖²_F`; gradient `4κV A(AᵀA − I)` on the `A` block.
/// With `project` the Hessian is clamped to be positive semi-definite.
pub fn orthogonality_energy(q: &Vec12, kappa: f64, volume: f64, project: bool) -> (f64, Vec12, Mat12) {
    let a = affine_map(q);
    let g = a.transpose() * a - Matrix3::identity();
    let w = kappa * volume;
    let energy = w * g.norm_squared();
    let grad_a = 4.0 * w * a * g;
    let mut grad = Vec12::zeros();
    let mut hess_a = nalgebra::SMatrix::<f64, 9, 9>::zeros();
    for i in 0..3 {
        for j in 0..3 {
            grad[3 + 3 * i + j] = grad_a[(i, j)];
            let mut e = Matrix3::zeros();
            e[(i, j)] = 1.0;
            let dg = e.transpose() * a + a.transpose() * e;
            let col = 4.0 * w * (e * g + a * dg);
            for k in 0..3 {
                for l in 0..3 {
                    hess_a[(3 * k + l, 3 * i + j)] = col[(k, l)];
                }
            }
        }
    }
    if project {
        hess_a = project_psd(&hess_a);
    }
    let mut hess = Mat12::zeros();
    hess.fixed_view_mut::<9, 9>(3, 3).copy_from(&hess_a);
    (energy, grad, hess)
}
