//! Small dense Hermitian linear algebra used pointwise (n ≤ 3).

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

pub fn hermitian_defect(m: &DMatrix<Complex64>) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

pub fn hermitian_part(m: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    (m + m.adjoint()) * Complex64::new(0.5, 0.0)
}

pub fn min_hermitian_eigenvalue(m: &DMatrix<Complex64>) -> f64 {
    hermitian_part(m)
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min)
}

/// Lower Cholesky factor of a Hermitian matrix; `None` unless every pivot is
/// strictly positive. Only the lower triangle of `m` is read.
pub fn cholesky_lower(m: &DMatrix<Complex64>) -> Option<DMatrix<Complex64>> {
    let n = m.nrows();
    let mut l = DMatrix::<Complex64>::zeros(n, n);
    for j in 0..n {
        let mut d = m[(j, j)].re;
        for k in 0..j {
            d -= l[(j, k)].norm_sqr();
        }
        if !(d > 0.0) || !d.is_finite() {
            return None;
        }
        let djj = d.sqrt();
        l[(j, j)] = Complex64::new(djj, 0.0);
        for i in (j + 1)..n {
            let mut v = m[(i, j)];
            for k in 0..j {
                v -= l[(i, k)] * l[(j, k)].conj();
            }
            l[(i, j)] = v / djj;
        }
    }
    Some(l)
}

/// `ln det m` via Cholesky; `None` unless `m` is positive definite.
pub fn log_det(m: &DMatrix<Complex64>) -> Option<f64> {
    let l = cholesky_lower(m)?;
    Some((0..m.nrows()).map(|i| 2.0 * l[(i, i)].re.ln()).sum())
}

/// Inverse of a positive definite Hermitian matrix.
pub fn inverse(m: &DMatrix<Complex64>) -> Option<DMatrix<Complex64>> {
    let l = cholesky_lower(m)?;
    let linv = l.try_inverse()?;
    Some(linv.adjoint() * linv)
}

/// Eigen-decomposition of the Hermitian pencil `(a, b)`, `b` positive definite:
/// `a v = λ b v`. Eigenvalues ascending; columns of the returned matrix are
/// `b`-orthonormal eigenvectors.
pub fn generalized_eigen(
    a: &DMatrix<Complex64>,
    b: &DMatrix<Complex64>,
) -> Option<(Vec<f64>, DMatrix<Complex64>)> {
    let l = cholesky_lower(b)?;
    let linv = l.try_inverse()?;
    let c = hermitian_part(&(&linv * a * linv.adjoint()));
    let eig = c.symmetric_eigen();
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&x, &y| eig.eigenvalues[x].total_cmp(&eig.eigenvalues[y]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let w = DMatrix::from_fn(a.nrows(), order.len(), |r, c| eig.eigenvectors[(r, order[c])]);
    let vecs = linv.adjoint() * w;
    Some((values, vecs))
}

pub fn generalized_eigenvalues(a: &DMatrix<Complex64>, b: &DMatrix<Complex64>) -> Option<Vec<f64>> {
    generalized_eigen(a, b).map(|(v, _)| v)
}

/// `v^H m v`.
pub fn quad_form(m: &DMatrix<Complex64>, v: &DVector<Complex64>) -> Complex64 {
    (v.adjoint() * m * v)[(0, 0)]
}
