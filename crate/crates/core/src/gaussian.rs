//! Optimal transport between Gaussians: the Bures–Wasserstein distance, the
//! affine Brenier map, affine map estimation and Gaussian barycenters.

use nalgebra::{DMatrix, DVector};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::linalg::{hs_norm, inv_sqrtm, min_eigenvalue, sqrtm, symmetrize};
use crate::measures::{DiscreteMeasure, GaussianMeasure};

/// Smallest eigenvalue treated as nonsingular.
pub const SINGULAR_EIG: f64 = 1e-12;

/// An affine map `x -> A x + c`.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineMap {
    pub a: DMatrix<f64>,
    pub c: DVector<f64>,
}

impl AffineMap {
    pub fn apply(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.a * x + &self.c
    }

    /// Image of a Gaussian: `N(A m + c, A S A^T)`.
    pub fn pushforward(&self, g: &GaussianMeasure) -> Result<GaussianMeasure> {
        let cov = symmetrize(&(&self.a * g.cov() * self.a.transpose()));
        GaussianMeasure::new(self.apply(g.mean()), cov)
    }

    pub fn to_json(&self) -> Value {
        let rows: Vec<Vec<f64>> = self.a.row_iter().map(|r| r.iter().copied().collect()).collect();
        json!({ "A": rows, "c": self.c.as_slice() })
    }
}

fn same_dim(a: &GaussianMeasure, b: &GaussianMeasure) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            found: b.dim(),
        });
    }
    Ok(())
}

/// `(S1^{1/2} S2 S1^{1/2})^{1/2}` and `S1^{1/2}`.
fn cross_root(s1: &DMatrix<f64>, s2: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
    let r1 = sqrtm(s1);
    let inner = sqrtm(&(&r1 * s2 * &r1));
    (inner, r1)
}

/// Squared Bures–Wasserstein distance.
pub fn gaussian_w2_squared(a: &GaussianMeasure, b: &GaussianMeasure) -> Result<f64> {
    same_dim(a, b)?;
    let mean_gap = (a.mean() - b.mean()).norm_squared();
    let (inner, _) = cross_root(a.cov(), b.cov());
    let bures = (a.cov().trace() + b.cov().trace() - 2.0 * inner.trace()).max(0.0);
    Ok(mean_gap + bures)
}

/// `W_2` between Gaussians. Singular covariances are allowed.
pub fn gaussian_w2(a: &GaussianMeasure, b: &GaussianMeasure) -> Result<f64> {
    Ok(gaussian_w2_squared(a, b)?.sqrt())
}

fn require_nonsingular(cov: &DMatrix<f64>) -> Result<()> {
    let l = min_eigenvalue(cov);
    if l <= SINGULAR_EIG {
        return Err(Error::SingularCovariance { min_eigenvalue: l });
    }
    Ok(())
}

/// Optimal map from `a` to `b`:
/// `A = S1^{-1/2} (S1^{1/2} S2 S1^{1/2})^{1/2} S1^{-1/2}`, `c = m2 - A m1`.
pub fn gaussian_brenier_map(a: &GaussianMeasure, b: &GaussianMeasure) -> Result<AffineMap> {
    same_dim(a, b)?;
    require_nonsingular(a.cov())?;
    let (inner, _) = cross_root(a.cov(), b.cov());
    let ir = inv_sqrtm(a.cov());
    let mat = symmetrize(&(&ir * inner * &ir));
    let c = b.mean() - &mat * a.mean();
    Ok(AffineMap { a: mat, c })
}

/// Estimated map from `N(0, I)` to the law of the samples.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineEstimate {
    pub map: AffineMap,
    /// Set when the empirical covariance has an eigenvalue below `1e-12`; the
    /// map is still returned, with the root computed on the clamped spectrum.
    pub rank_deficient: bool,
}

/// `x -> S^{1/2} x + m` from the sample mean and `1/n` covariance.
pub fn estimate_affine_map(samples: &DiscreteMeasure) -> Result<AffineEstimate> {
    let d = samples.dim();
    if samples.len() < d + 1 {
        return Err(Error::InvalidArgument(format!(
            "need at least {} samples in dimension {d}, got {}",
            d + 1,
            samples.len()
        )));
    }
    let cov = symmetrize(&samples.covariance());
    let rank_deficient = min_eigenvalue(&cov) < SINGULAR_EIG;
    Ok(AffineEstimate {
        map: AffineMap {
            a: sqrtm(&cov),
            c: samples.mean(),
        },
        rank_deficient,
    })
}

/// Result of the Gaussian barycenter fixed-point iteration.
#[derive(Debug, Clone)]
pub struct GaussianBarycenter {
    pub measure: GaussianMeasure,
    pub iterations: usize,
    /// `|| S - sum_k w_k (S^{1/2} S_k S^{1/2})^{1/2} ||_HS` at the returned `S`.
    pub residual: f64,
    /// `F(S) = 1/2 sum_k w_k W2^2(N(m, S), mu_k)` at every iterate, starting
    /// from the initialization.
    pub functional: Vec<f64>,
}

pub const BARYCENTER_STEP_TOL: f64 = 1e-10;
pub const BARYCENTER_MAX_ITER: usize = 10_000;
pub const BARYCENTER_RESIDUAL_TOL: f64 = 1e-8;

fn check_weights(weights: &[f64], k: usize) -> Result<()> {
    if weights.len() != k || k == 0 {
        return Err(Error::InvalidArgument(format!("{} weights for {k} inputs", weights.len())));
    }
    if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) || (weights.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidArgument("weights must be a probability vector".into()));
    }
    Ok(())
}

/// Weighted `W_2` barycenter of Gaussians. The mean is the weighted mean; the
/// covariance is iterated as
/// `S <- S^{-1/2} (sum_k w_k (S^{1/2} S_k S^{1/2})^{1/2})^2 S^{-1/2}`,
/// the unit-step descent map, starting from the arithmetic mean of the `S_k`.
pub fn gaussian_barycenter(inputs: &[GaussianMeasure], weights: &[f64]) -> Result<GaussianBarycenter> {
    check_weights(weights, inputs.len())?;
    let d = inputs[0].dim();
    for g in inputs {
        same_dim(&inputs[0], g)?;
        require_nonsingular(g.cov())?;
    }
    let mean = inputs
        .iter()
        .zip(weights)
        .fold(DVector::zeros(d), |acc, (g, w)| acc + g.mean() * *w);
    let functional = |s: &DMatrix<f64>| -> Result<f64> {
        let b = GaussianMeasure::new(mean.clone(), s.clone())?;
        let mut f = 0.0;
        for (g, w) in inputs.iter().zip(weights) {
            f += 0.5 * w * gaussian_w2_squared(&b, g)?;
        }
        Ok(f)
    };
    // Returns (sum_k w_k (S^{1/2} S_k S^{1/2})^{1/2}, S^{1/2}).
    let averaged_root = |s: &DMatrix<f64>| {
        let r = sqrtm(s);
        let mut acc = DMatrix::zeros(d, d);
        for (g, w) in inputs.iter().zip(weights) {
            acc += sqrtm(&(&r * g.cov() * &r)) * *w;
        }
        (acc, r)
    };

    let mut s = symmetrize(
        &inputs
            .iter()
            .zip(weights)
            .fold(DMatrix::zeros(d, d), |acc, (g, w)| acc + g.cov() * *w),
    );
    let mut trace = vec![functional(&s)?];
    let mut iterations = 0;
    loop {
        let (m, r) = averaged_root(&s);
        let ir = crate::linalg::inv_sym(&r);
        let next = symmetrize(&(&ir * &m * &m * &ir));
        let step = hs_norm(&(&next - &s));
        s = next;
        iterations += 1;
        trace.push(functional(&s)?);
        if step < BARYCENTER_STEP_TOL || iterations >= BARYCENTER_MAX_ITER {
            break;
        }
    }
    let (m, _) = averaged_root(&s);
    let residual = hs_norm(&(&s - m));
    if iterations >= BARYCENTER_MAX_ITER && residual > BARYCENTER_RESIDUAL_TOL {
        return Err(Error::NoConvergence { iterations, residual });
    }
    Ok(GaussianBarycenter {
        measure: GaussianMeasure::new(mean, s)?,
        iterations,
        residual,
        functional: trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn g1(m: f64, v: f64) -> GaussianMeasure {
        GaussianMeasure::from_slices(&[m], &[&[v]]).unwrap()
    }

    fn diag2(a: f64, b: f64) -> GaussianMeasure {
        GaussianMeasure::from_slices(&[0.0, 0.0], &[&[a, 0.0], &[0.0, b]]).unwrap()
    }

    #[test]
    fn w2_examples() {
        assert!((gaussian_w2(&g1(0.0, 1.0), &g1(3.0, 1.0)).unwrap() - 3.0).abs() < 1e-12);
        assert!((gaussian_w2(&g1(0.0, 1.0), &g1(0.0, 4.0)).unwrap() - 1.0).abs() < 1e-12);
        let w = gaussian_w2(&diag2(2.0, 1.0), &diag2(1.0, 2.0)).unwrap();
        assert!((w - 2f64.sqrt() * (2f64.sqrt() - 1.0)).abs() < 1e-12);
    }

    #[test]
    fn w2_accepts_singular() {
        let w = gaussian_w2(&diag2(1.0, 0.0), &diag2(0.0, 1.0)).unwrap();
        assert!((w - 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn brenier_examples() {
        let g = GaussianMeasure::from_slices(&[1.0, 2.0], &[&[2.0, 0.3], &[0.3, 1.0]]).unwrap();
        let id = gaussian_brenier_map(&g, &g).unwrap();
        assert!(hs_norm(&(&id.a - DMatrix::identity(2, 2))) < 1e-12);
        assert!(id.c.norm() < 1e-12);

        let t = gaussian_brenier_map(&g1(0.0, 1.0), &g1(2.0, 9.0)).unwrap();
        assert!((t.a[(0, 0)] - 3.0).abs() < 1e-12 && (t.c[0] - 2.0).abs() < 1e-12);

        let (a, b) = (diag2(2.0, 1.0), diag2(1.0, 3.0));
        let t = gaussian_brenier_map(&a, &b).unwrap();
        assert!(hs_norm(&(&t.a * a.cov() * &t.a - b.cov())) < 1e-8);

        assert!(matches!(
            gaussian_brenier_map(&diag2(1.0, 0.0), &a),
            Err(Error::SingularCovariance { .. })
        ));
    }

    #[test]
    fn affine_estimate_examples() {
        let two = DiscreteMeasure::uniform(vec![vec![-1.0], vec![1.0]]).unwrap();
        let e = estimate_affine_map(&two).unwrap();
        assert!((e.map.a[(0, 0)] - 1.0).abs() < 1e-15 && e.map.c[0] == 0.0);
        assert!(!e.rank_deficient);

        let flat = DiscreteMeasure::uniform(vec![vec![2.5], vec![2.5], vec![2.5]]).unwrap();
        let e = estimate_affine_map(&flat).unwrap();
        assert_eq!(e.map.a[(0, 0)], 0.0);
        assert_eq!(e.map.c[0], 2.5);
        assert!(e.rank_deficient);
    }

    #[test]
    fn barycenter_examples() {
        let g = GaussianMeasure::from_slices(&[1.0, -1.0], &[&[2.0, 0.3], &[0.3, 1.0]]).unwrap();
        let b = gaussian_barycenter(&[g.clone(), g.clone()], &[0.5, 0.5]).unwrap();
        assert!(hs_norm(&(b.measure.cov() - g.cov())) < 1e-12);

        let b = gaussian_barycenter(&[g1(0.0, 1.0), g1(0.0, 9.0)], &[0.5, 0.5]).unwrap();
        assert!((b.measure.cov()[(0, 0)] - 4.0).abs() < 1e-10);
        assert!(b.residual <= 1e-8);

        // Commuting covariances: the root of the barycenter averages the roots.
        let b = gaussian_barycenter(&[diag2(4.0, 1.0), diag2(1.0, 9.0)], &[0.25, 0.75]).unwrap();
        let expect = DMatrix::from_diagonal(&DVector::from_vec(vec![0.25 * 2.0 + 0.75, 0.25 + 0.75 * 3.0]));
        assert!(hs_norm(&(sqrtm(b.measure.cov()) - expect)) < 1e-9);
    }

    #[test]
    fn barycenter_rejects_singular() {
        let err = gaussian_barycenter(&[diag2(1.0, 0.0), diag2(1.0, 1.0)], &[0.5, 0.5]).unwrap_err();
        assert!(matches!(err, Error::SingularCovariance { .. }));
    }
}
