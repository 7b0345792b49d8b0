//! Small dense helpers shared by the energy terms.

use nalgebra::{DMatrix, SMatrix};

/// Clamps negative eigenvalues of a symmetric matrix to zero.
pub fn project_psd<const N: usize>(h: &SMatrix<f64, N, N>) -> SMatrix<f64, N, N> {
    let d = project_psd_dyn(&DMatrix::from_column_slice(N, N, h.as_slice()));
    SMatrix::<f64, N, N>::from_column_slice(d.as_slice())
}

pub fn project_psd_dyn(h: &DMatrix<f64>) -> DMatrix<f64> {
    let sym = (h + h.transpose()) * 0.5;
    let eig = sym.clone().symmetric_eigen();
    if eig.eigenvalues.min() >= 0.0 {
        return sym;
    }
    let d = eig.eigenvalues.map(|l| l.max(0.0));
    &eig.eigenvectors * DMatrix::from_diagonal(&d) * eig.eigenvectors.transpose()
}
