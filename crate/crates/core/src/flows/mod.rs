//! Particle discretizations of Wasserstein and Wasserstein–Fisher–Rao gradient
//! flows, Langevin and SVGD samplers, and flows over Gaussian parameters.
//!
//! All integrators are explicit Euler.

mod attention;
mod gaussian;
mod npmle;
mod particles;

use std::fmt::Write as _;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::json::fmt_g17;
use crate::linalg;
use crate::measures::{DiscreteMeasure, GaussianMeasure, RngStream};

pub use attention::{attention_flow, AttentionVariant};
pub use gaussian::{
    bw_vi_flow, gauss_hermite, gaussian_mixture_flow, kl_up_to_constant, BwViRun, Expectation,
    GaussianParticleEnsemble, MixtureRun, MixtureWeights, EIG_FLOOR,
};
pub use npmle::{npmle_flow, npmle_flow_from, npmle_objective, NpmleMode, NpmleRun};
pub use particles::{energy, langevin_step, svgd_step, wfr_step, wgf_step, MAX_HALVINGS};

/// Tolerance on the weight sum of an ensemble.
pub const WEIGHT_SUM_TOL: f64 = 1e-10;

/// Weighted point cloud moved by a flow.
#[derive(Debug, Clone, PartialEq)]
pub struct ParticleEnsemble {
    pub positions: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
    pub time: f64,
}

impl ParticleEnsemble {
    pub fn new(positions: Vec<Vec<f64>>, weights: Vec<f64>) -> Result<Self> {
        if positions.is_empty() {
            return Err(Error::Invariant("ensemble needs at least one particle".into()));
        }
        if positions.len() != weights.len() {
            return Err(Error::DimensionMismatch {
                expected: positions.len(),
                found: weights.len(),
            });
        }
        let d = positions[0].len();
        if d == 0 {
            return Err(Error::Invariant("particles must have dimension >= 1".into()));
        }
        if let Some(p) = positions.iter().find(|p| p.len() != d) {
            return Err(Error::DimensionMismatch { expected: d, found: p.len() });
        }
        let ens = Self {
            positions,
            weights,
            time: 0.0,
        };
        ens.check_weights()?;
        Ok(ens)
    }

    pub fn uniform(positions: Vec<Vec<f64>>) -> Result<Self> {
        let n = positions.len().max(1);
        Self::new(positions, vec![1.0 / n as f64; n])
    }

    pub fn from_measure(mu: &DiscreteMeasure) -> Self {
        Self {
            positions: mu.to_points(),
            weights: mu.weights().to_vec(),
            time: 0.0,
        }
    }

    pub fn to_measure(&self) -> Result<DiscreteMeasure> {
        DiscreteMeasure::new(self.positions.clone(), self.weights.clone())
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.positions[0].len()
    }

    pub fn check_weights(&self) -> Result<()> {
        if self.weights.iter().any(|w| !(*w >= 0.0)) {
            return Err(Error::Invariant("negative or NaN particle weight".into()));
        }
        let sum: f64 = self.weights.iter().sum();
        if (sum - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(Error::Invariant(format!("particle weights sum to {sum}")));
        }
        Ok(())
    }
}

/// CSV with columns `step,time,particle_id,x0..x{d-1},weight`, one frame per step.
pub fn trajectory_csv(frames: &[ParticleEnsemble]) -> String {
    trajectory_csv_steps(frames.iter().enumerate())
}

/// Like [`trajectory_csv`] for a subsampled trajectory labelled by step number.
pub fn trajectory_csv_steps<'a>(frames: impl IntoIterator<Item = (usize, &'a ParticleEnsemble)>) -> String {
    let mut frames = frames.into_iter().peekable();
    let mut out = String::from("step,time,particle_id");
    let d = frames.peek().map_or(0, |(_, f)| f.dim());
    for k in 0..d {
        let _ = write!(out, ",x{k}");
    }
    out.push_str(",weight\n");
    for (step, frame) in frames {
        for (i, (x, w)) in frame.positions.iter().zip(&frame.weights).enumerate() {
            let _ = write!(out, "{step},{},{i}", fmt_g17(frame.time));
            for v in x {
                let _ = write!(out, ",{}", fmt_g17(*v));
            }
            let _ = writeln!(out, ",{}", fmt_g17(*w));
        }
    }
    out
}

type ScalarFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
type VectorFn = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;
type MatrixFn = Arc<dyn Fn(&[f64]) -> DMatrix<f64> + Send + Sync>;

/// Confining potential `V` with gradient and Hessian.
#[derive(Clone)]
pub struct Potential {
    value: ScalarFn,
    gradient: VectorFn,
    hessian: MatrixFn,
}

impl std::fmt::Debug for Potential {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("Potential")
    }
}

impl Potential {
    pub fn new(
        value: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
        gradient: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
        hessian: impl Fn(&[f64]) -> DMatrix<f64> + Send + Sync + 'static,
    ) -> Self {
        Self {
            value: Arc::new(value),
            gradient: Arc::new(gradient),
            hessian: Arc::new(hessian),
        }
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        (self.value)(x)
    }

    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        (self.gradient)(x)
    }

    pub fn hessian(&self, x: &[f64]) -> DMatrix<f64> {
        (self.hessian)(x)
    }

    pub fn zero() -> Self {
        Self::new(
            |_| 0.0,
            |x| vec![0.0; x.len()],
            |x| DMatrix::zeros(x.len(), x.len()),
        )
    }

    /// `||x||^2 / 2`, the potential of the standard Gaussian.
    pub fn quadratic() -> Self {
        Self::new(
            |x| 0.5 * x.iter().map(|v| v * v).sum::<f64>(),
            |x| x.to_vec(),
            |x| DMatrix::identity(x.len(), x.len()),
        )
    }

    /// `(x - m)^T S^{-1} (x - m) / 2` for the target `N(m, S)`.
    pub fn gaussian(target: &GaussianMeasure) -> Result<Self> {
        let min_eig = linalg::min_eigenvalue(target.cov());
        if min_eig <= 0.0 {
            return Err(Error::SingularCovariance { min_eigenvalue: min_eig });
        }
        let prec = Arc::new(linalg::inv_sym(target.cov()));
        let mean = Arc::new(target.mean().clone());
        let (p1, m1) = (prec.clone(), mean.clone());
        let (p2, m2) = (prec.clone(), mean);
        Ok(Self::new(
            move |x| {
                let r = DVector::from_column_slice(x) - &*m1;
                0.5 * r.dot(&(&*p1 * &r))
            },
            move |x| {
                let r = DVector::from_column_slice(x) - &*m2;
                (&*p2 * r).iter().copied().collect()
            },
            move |_| (*prec).clone(),
        ))
    }

    /// `sum_k x_k^4 / 4`.
    pub fn quartic() -> Self {
        Self::new(
            |x| x.iter().map(|v| v.powi(4)).sum::<f64>() / 4.0,
            |x| x.iter().map(|v| v.powi(3)).collect(),
            |x| DMatrix::from_diagonal(&DVector::from_iterator(x.len(), x.iter().map(|v| 3.0 * v * v))),
        )
    }

    /// Equal mixture of `N(+a e_1, I)` and `N(-a e_1, I)`:
    /// `V(x) = (||x||^2 + a^2) / 2 - log cosh(a x_1)`.
    pub fn bimodal(shift: f64) -> Self {
        let a = shift;
        Self::new(
            move |x| 0.5 * (x.iter().map(|v| v * v).sum::<f64>() + a * a) - log_cosh(a * x[0]),
            move |x| {
                let mut g = x.to_vec();
                g[0] -= a * (a * x[0]).tanh();
                g
            },
            move |x| {
                let mut h = DMatrix::identity(x.len(), x.len());
                let sech = 1.0 / (a * x[0]).cosh();
                h[(0, 0)] -= a * a * sech * sech;
                h
            },
        )
    }
}

fn log_cosh(z: f64) -> f64 {
    let z = z.abs();
    z + (-2.0 * z).exp().ln_1p() - std::f64::consts::LN_2
}

/// Even interaction kernel `W` with its gradient.
#[derive(Clone)]
pub struct Interaction {
    value: ScalarFn,
    gradient: VectorFn,
}

impl std::fmt::Debug for Interaction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("Interaction")
    }
}

impl Interaction {
    pub fn new(
        value: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
        gradient: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
    ) -> Self {
        Self {
            value: Arc::new(value),
            gradient: Arc::new(gradient),
        }
    }

    pub fn value(&self, z: &[f64]) -> f64 {
        (self.value)(z)
    }

    pub fn gradient(&self, z: &[f64]) -> Vec<f64> {
        (self.gradient)(z)
    }

    /// `||z||^2 / 2`.
    pub fn quadratic() -> Self {
        Self::new(|z| 0.5 * z.iter().map(|v| v * v).sum::<f64>(), |z| z.to_vec())
    }

    /// Attractive Gaussian well `-exp(-||z||^2 / (2 s^2))`.
    pub fn gaussian_well(scale: f64) -> Self {
        let s2 = scale * scale;
        Self::new(
            move |z| -(-z.iter().map(|v| v * v).sum::<f64>() / (2.0 * s2)).exp(),
            move |z| {
                let k = (-z.iter().map(|v| v * v).sum::<f64>() / (2.0 * s2)).exp();
                z.iter().map(|v| v * k / s2).collect()
            },
        )
    }
}

/// `F(mu) = int V dmu + 1/2 iint W(x - y) dmu dmu + sigma^2 int log mu`; every
/// term is optional.
#[derive(Debug, Clone, Default)]
pub struct FunctionalSpec {
    pub potential: Option<Potential>,
    pub interaction: Option<Interaction>,
    pub entropy: f64,
}

impl FunctionalSpec {
    /// Checks `sigma^2 >= 0` and `W(-z) = W(z)` on random probes.
    pub fn validate(&self, dim: usize, stream: &RngStream) -> Result<()> {
        if !(self.entropy >= 0.0) {
            return Err(Error::InvalidArgument(format!("entropy coefficient must be >= 0, got {}", self.entropy)));
        }
        if let Some(w) = &self.interaction {
            let mut rng = stream.rng();
            for _ in 0..32 {
                let z: Vec<f64> = (0..dim).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
                let neg: Vec<f64> = z.iter().map(|v| -v).collect();
                let (a, b) = (w.value(&z), w.value(&neg));
                if (a - b).abs() > 1e-9 {
                    return Err(Error::Invariant(format!("interaction is not even: W(z) = {a}, W(-z) = {b}")));
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fd_gradient(p: &Potential, x: &[f64]) -> Vec<f64> {
        let h = 1e-6;
        (0..x.len())
            .map(|k| {
                let mut a = x.to_vec();
                let mut b = x.to_vec();
                a[k] += h;
                b[k] -= h;
                (p.value(&a) - p.value(&b)) / (2.0 * h)
            })
            .collect()
    }

    #[test]
    fn potential_gradients_match_finite_differences() {
        let g = GaussianMeasure::from_slices(&[0.5, -1.0], &[&[2.0, 0.3], &[0.3, 1.0]]).unwrap();
        let x = [0.7, 0.2];
        for p in [Potential::quadratic(), Potential::quartic(), Potential::bimodal(1.5), Potential::gaussian(&g).unwrap()] {
            let fd = fd_gradient(&p, &x);
            for (a, b) in p.gradient(&x).iter().zip(&fd) {
                assert!((a - b).abs() < 1e-6, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn bimodal_is_a_mixture_log_density() {
        let a = 2.0;
        let p = Potential::bimodal(a);
        let x = [0.3, -0.4];
        let r2 = |s: f64| (x[0] - s).powi(2) + x[1] * x[1];
        let density = 0.5 * (-r2(a) / 2.0).exp() + 0.5 * (-r2(-a) / 2.0).exp();
        assert!((p.value(&x) + density.ln()).abs() < 1e-12);
    }

    #[test]
    fn odd_interaction_is_rejected() {
        let spec = FunctionalSpec {
            interaction: Some(Interaction::new(|z| z[0], |z| vec![1.0; z.len()])),
            ..Default::default()
        };
        assert!(spec.validate(2, &RngStream::new(0, 0)).is_err());
        let even = FunctionalSpec {
            interaction: Some(Interaction::quadratic()),
            ..Default::default()
        };
        assert!(even.validate(2, &RngStream::new(0, 0)).is_ok());
    }

    #[test]
    fn csv_layout() {
        let e = ParticleEnsemble::uniform(vec![vec![1.0, 2.0], vec![0.5, -1.0]]).unwrap();
        let csv = trajectory_csv(&[e]);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "step,time,particle_id,x0,x1,weight");
        assert_eq!(lines[2], "0,0.0,1,0.5,-1.0,0.5");
    }
}
