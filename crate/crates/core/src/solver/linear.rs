use nalgebra::{DMatrix, DVector};
use nalgebra_sparse::factorization::CscCholesky;
use nalgebra_sparse::CscMatrix;

/// Result of the Newton linear solve.
#[derive(Debug, Clone)]
pub struct Direction {
    pub delta: DVector<f64>,
    /// Diagonal shift that was needed (0 when the plain factorization worked).
    pub regularization: f64,
    /// True when every factorization failed and `−∇E` was used.
    pub gradient_fallback: bool,
}

fn add_diagonal(h: &CscMatrix<f64>, eps: f64) -> CscMatrix<f64> {
    if eps == 0.0 {
        return h.clone();
    }
    let n = h.nrows();
    let mut coo = nalgebra_sparse::CooMatrix::new(n, n);
    for (i, j, v) in h.triplet_iter() {
        coo.push(i, j, *v);
    }
    for i in 0..n {
        coo.push(i, i, eps);
    }
    CscMatrix::from(&coo)
}

/// Solves `(H + εI) Δ = −g`, escalating `ε` from `1e-8‖H‖` by factors of
/// ten up to `1e-4‖H‖` when the factorization fails, then falling back
/// to steepest descent.
pub fn newton_direction(h: &CscMatrix<f64>, g: &DVector<f64>, dense_threshold: usize) -> Direction {
    let n = g.len();
    let norm = h.values().iter().map(|v| v * v).sum::<f64>().sqrt();
    let rhs = -g;
    let mut shifts = vec![0.0];
    let mut eps = 1e-8 * norm;
    while eps <= 1e-4 * norm * (1.0 + 1e-12) && eps > 0.0 {
        shifts.push(eps);
        eps *= 10.0;
    }
    let dense = (n < dense_threshold).then(|| DMatrix::from(h));
    for shift in shifts {
        let solution = match &dense {
            Some(d) => {
                let mut m = d.clone();
                for i in 0..n {
                    m[(i, i)] += shift;
                }
                m.cholesky().map(|c| c.solve(&rhs))
            }
            None => CscCholesky::factor(&add_diagonal(h, shift)).ok().map(|c| c.solve(&rhs).column(0).into_owned()),
        };
        if let Some(delta) = solution {
            if delta.iter().all(|v| v.is_finite()) && delta.dot(g) < 0.0 || g.norm() == 0.0 {
                return Direction { delta, regularization: shift, gradient_fallback: false };
            }
        }
    }
    Direction { delta: rhs, regularization: f64::NAN, gradient_fallback: true }
}
