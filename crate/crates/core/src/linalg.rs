//! Symmetric matrix functions via eigendecomposition.
//!
//! Every root and inverse root in the crate goes through [`sym_apply`], which
//! symmetrizes the input, diagonalizes it and maps the spectrum. Negative
//! eigenvalues produced by rounding are clamped at zero.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

/// Returns `(A + A^T) / 2`.
pub fn symmetrize(a: &DMatrix<f64>) -> DMatrix<f64> {
    (a + a.transpose()) * 0.5
}

/// Applies `f` to the spectrum of the symmetric part of `a`.
pub fn sym_apply(a: &DMatrix<f64>, f: impl Fn(f64) -> f64) -> DMatrix<f64> {
    let eig = SymmetricEigen::new(symmetrize(a));
    let mapped = eig.eigenvalues.map(f);
    let q = &eig.eigenvectors;
    let mut out = q * DMatrix::from_diagonal(&mapped) * q.transpose();
    // Reassert exact symmetry lost in the triple product.
    out = symmetrize(&out);
    out
}

/// Eigenvalues of the symmetric part, ascending.
pub fn sym_eigenvalues(a: &DMatrix<f64>) -> DVector<f64> {
    let eig = SymmetricEigen::new(symmetrize(a));
    let mut v: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    v.sort_by(|x, y| x.total_cmp(y));
    DVector::from_vec(v)
}

pub fn min_eigenvalue(a: &DMatrix<f64>) -> f64 {
    sym_eigenvalues(a)[0]
}

/// PSD square root with eigenvalues clamped at zero.
pub fn sqrtm(a: &DMatrix<f64>) -> DMatrix<f64> {
    sym_apply(a, |l| l.max(0.0).sqrt())
}

/// Inverse square root; caller guarantees positive definiteness.
pub fn inv_sqrtm(a: &DMatrix<f64>) -> DMatrix<f64> {
    sym_apply(a, |l| 1.0 / l.sqrt())
}

pub fn inv_sym(a: &DMatrix<f64>) -> DMatrix<f64> {
    sym_apply(a, |l| 1.0 / l)
}

/// Clamps the spectrum at `floor`; returns the matrix and whether clamping fired.
pub fn clamp_spectrum(a: &DMatrix<f64>, floor: f64) -> (DMatrix<f64>, bool) {
    let eig = SymmetricEigen::new(symmetrize(a));
    let fired = eig.eigenvalues.iter().any(|&l| l < floor);
    if !fired {
        return (symmetrize(a), false);
    }
    let mapped = eig.eigenvalues.map(|l| l.max(floor));
    let q = &eig.eigenvectors;
    (symmetrize(&(q * DMatrix::from_diagonal(&mapped) * q.transpose())), true)
}

/// Hilbert–Schmidt (Frobenius) norm.
pub fn hs_norm(a: &DMatrix<f64>) -> f64 {
    a.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// `log det` of a symmetric positive definite matrix.
pub fn log_det_spd(a: &DMatrix<f64>) -> f64 {
    sym_eigenvalues(a).iter().map(|l| l.ln()).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sqrt_squares_back() {
        let a = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        let r = sqrtm(&a);
        assert!(hs_norm(&(&r * &r - &a)) < 1e-12);
        let ir = inv_sqrtm(&a);
        let id = &ir * &a * &ir;
        assert!(hs_norm(&(id - DMatrix::identity(2, 2))) < 1e-12);
    }

    #[test]
    fn tiny_negative_eigenvalue_is_clamped() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1e-14]);
        let r = sqrtm(&a);
        assert_eq!(r[(1, 1)], 0.0);
        let (c, fired) = clamp_spectrum(&a, 1e-12);
        assert!(fired);
        assert!((c[(1, 1)] - 1e-12).abs() < 1e-20);
    }
}
