//! Small dense linear-algebra helpers shared by the solvers.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::{CMatrix, CVector, Complex64};

/// Eigenvalues of a Hermitian matrix, ascending.
pub fn hermitian_eigenvalues(m: &CMatrix) -> Vec<f64> {
    if m.nrows() == 0 {
        return Vec::new();
    }
    // Real embedding [[Re, −Im], [Im, Re]]: every eigenvalue appears twice.
    // The complex symmetric solver can return non-finite values on matrices
    // with exactly zero rows, the real one does not.
    let h = hermitian_part(m);
    let n = h.nrows();
    let mut emb = DMatrix::<f64>::zeros(2 * n, 2 * n);
    for i in 0..n {
        for j in 0..n {
            let z = h[(i, j)];
            emb[(i, j)] = z.re;
            emb[(i + n, j + n)] = z.re;
            emb[(i, j + n)] = -z.im;
            emb[(i + n, j)] = z.im;
        }
    }
    let mut ev: Vec<f64> = SymmetricEigen::new(emb).eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev.into_iter().step_by(2).collect()
}

/// Largest eigenvalue of a Hermitian matrix (0 for an empty matrix).
pub fn hermitian_max_eigenvalue(m: &CMatrix) -> f64 {
    hermitian_eigenvalues(m).last().copied().unwrap_or(0.0)
}

/// Smallest eigenvalue of a Hermitian matrix (0 for an empty matrix).
pub fn hermitian_min_eigenvalue(m: &CMatrix) -> f64 {
    hermitian_eigenvalues(m).first().copied().unwrap_or(0.0)
}

/// Smallest eigenvalue of a real symmetric matrix.
pub fn symmetric_min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 {
        return 0.0;
    }
    let sym = (m + m.transpose()) * 0.5;
    SymmetricEigen::new(sym)
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

/// `(M + Mᴴ) / 2`.
pub fn hermitian_part(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()) * Complex64::new(0.5, 0.0)
}

/// `Re{xᴴ M x}`.
pub fn quad_form(m: &CMatrix, x: &CVector) -> f64 {
    x.dotc(&(m * x)).re
}

/// `Re{xᴴ y}`.
pub fn re_dot(x: &CVector, y: &CVector) -> f64 {
    x.dotc(y).re
}

/// Largest Hermitian deviation `max |M - Mᴴ|` entrywise.
pub fn hermitian_defect(m: &CMatrix) -> f64 {
    (m - m.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn max_abs(v: &CVector) -> f64 {
    v.iter().map(|z| z.norm()).fold(0.0, f64::max)
}
