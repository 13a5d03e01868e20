//! Distances that avoid the curse of dimensionality: MMD, sliced and smoothed
//! Wasserstein.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::exact::ExactSolver;
use crate::measures::{check_exponent, check_same_dim, DiscreteMeasure, RngStream};
use crate::univariate::wp_atoms;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Kernel {
    /// `exp(-||x - y||^2 / (2 sigma^2))`
    Gaussian { sigma: f64 },
    /// `exp(-||x - y|| / scale)`
    Laplace { scale: f64 },
}

impl Kernel {
    fn bandwidth(&self) -> f64 {
        match *self {
            Kernel::Gaussian { sigma } => sigma,
            Kernel::Laplace { scale } => scale,
        }
    }

    pub fn eval(&self, x: &[f64], y: &[f64]) -> f64 {
        let sq: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
        match *self {
            Kernel::Gaussian { sigma } => (-sq / (2.0 * sigma * sigma)).exp(),
            Kernel::Laplace { scale } => (-sq.sqrt() / scale).exp(),
        }
    }

    /// Gradient of `z -> k(z)` for the translation-invariant kernel; zero at `z = 0`.
    pub fn grad(&self, z: &[f64]) -> Vec<f64> {
        let sq: f64 = z.iter().map(|v| v * v).sum();
        let factor = match *self {
            Kernel::Gaussian { sigma } => -(-sq / (2.0 * sigma * sigma)).exp() / (sigma * sigma),
            Kernel::Laplace { scale } => {
                let r = sq.sqrt();
                if r == 0.0 {
                    0.0
                } else {
                    -(-r / scale).exp() / (scale * r)
                }
            }
        };
        z.iter().map(|v| factor * v).collect()
    }
}

fn kernel_mean(a: &DiscreteMeasure, b: &DiscreteMeasure, k: &Kernel) -> f64 {
    a.points()
        .zip(a.weights())
        .map(|(x, wx)| wx * b.points().zip(b.weights()).map(|(y, wy)| wy * k.eval(x, y)).sum::<f64>())
        .sum()
}

fn canonical_order(mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> bool {
    let key = |m: &DiscreteMeasure| (m.len(), m.coords().to_vec(), m.weights().to_vec());
    let (a, b) = (key(mu), key(nu));
    a.0.cmp(&b.0)
        .then_with(|| a.1.iter().zip(&b.1).map(|(x, y)| x.total_cmp(y)).find(|o| o.is_ne()).unwrap_or(std::cmp::Ordering::Equal))
        .then_with(|| a.2.iter().zip(&b.2).map(|(x, y)| x.total_cmp(y)).find(|o| o.is_ne()).unwrap_or(std::cmp::Ordering::Equal))
        .is_le()
}

/// Maximum mean discrepancy between the kernel mean embeddings.
pub fn mmd(mu: &DiscreteMeasure, nu: &DiscreteMeasure, kernel: Kernel) -> Result<f64> {
    check_same_dim(mu, nu)?;
    let bw = kernel.bandwidth();
    if !(bw > 0.0 && bw.is_finite()) {
        return Err(Error::BadBandwidth(bw));
    }
    // Fix the summation order of the cross term so that swapping the
    // arguments gives a bit-identical value.
    let (a, b) = if canonical_order(mu, nu) { (mu, nu) } else { (nu, mu) };
    let sq = kernel_mean(mu, mu, &kernel) + kernel_mean(nu, nu, &kernel) - 2.0 * kernel_mean(a, b, &kernel);
    Ok(sq.max(0.0).sqrt())
}

/// Sliced Wasserstein estimate. `se` is the standard error of the average
/// of `W_p^p` over directions; `value` is that average to the power `1/p`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlicedEstimate {
    pub value: f64,
    pub mean_pth_power: f64,
    pub se: f64,
}

impl SlicedEstimate {
    pub fn to_json(&self) -> Value {
        json!({ "value": self.value, "mean_pth_power": self.mean_pth_power, "se": self.se })
    }
}

/// Uniform direction on the sphere from normalized Gaussian coordinates.
pub fn random_direction<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Vec<f64> {
    loop {
        let z: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        let norm = z.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            return z.into_iter().map(|v| v / norm).collect();
        }
    }
}

fn project(mu: &DiscreteMeasure, theta: &[f64]) -> Vec<f64> {
    mu.points()
        .map(|x| x.iter().zip(theta).map(|(a, b)| a * b).sum())
        .collect()
}

pub(crate) fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let k = values.len() as f64;
    let mean = values.iter().sum::<f64>() / k;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (k - 1.0);
    (mean, (var / k).sqrt())
}

/// Monte Carlo sliced `W_p`; direction `k` is drawn from `stream.derive(k)`.
pub fn sliced_wasserstein(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    p: f64,
    n_directions: usize,
    stream: &RngStream,
) -> Result<SlicedEstimate> {
    check_same_dim(mu, nu)?;
    check_exponent(p)?;
    if n_directions == 0 {
        return Err(Error::InvalidArgument("need at least one direction".into()));
    }
    let d = mu.dim();
    let powers: Vec<f64> = (0..n_directions as u64)
        .into_par_iter()
        .map(|k| {
            let theta = random_direction(d, &mut stream.derive(k).rng());
            let xs = project(mu, &theta);
            let ys = project(nu, &theta);
            wp_atoms(&xs, mu.weights(), &ys, nu.weights(), p).powf(p)
        })
        .collect();
    let (mean, se) = mean_and_se(&powers);
    Ok(SlicedEstimate {
        value: mean.max(0.0).powf(1.0 / p),
        mean_pth_power: mean,
        se,
    })
}

/// How Gaussian perturbations are shared between the two measures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NoiseMode {
    #[default]
    Independent,
    /// Copy `k` of atom `i` receives the same noise in both measures.
    Shared,
}

fn perturb(mu: &DiscreteMeasure, sigma: f64, n_noise: usize, stream: RngStream) -> Result<DiscreteMeasure> {
    let d = mu.dim();
    let mut rng = stream.rng();
    let mut coords = Vec::with_capacity(mu.len() * n_noise * d);
    let mut weights = Vec::with_capacity(mu.len() * n_noise);
    for (x, w) in mu.points().zip(mu.weights()) {
        for _ in 0..n_noise {
            for xk in x {
                let z: f64 = rng.sample(StandardNormal);
                coords.push(xk + sigma * z);
            }
            weights.push(w / n_noise as f64);
        }
    }
    DiscreteMeasure::from_flat(d, coords, weights)
}

/// Monte Carlo estimate of the smoothed distance `W_1(mu * N(0, s^2 I), nu * N(0, s^2 I))`:
/// each atom is split into `n_noise` equally weighted Gaussian perturbations and
/// the exact `W_1` between the two perturbed clouds is returned. Consistent as
/// `n_noise` grows, biased at any fixed `n_noise`.
pub fn smoothed_w1(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    sigma: f64,
    n_noise: usize,
    stream: &RngStream,
    mode: NoiseMode,
    solver: &ExactSolver,
) -> Result<f64> {
    check_same_dim(mu, nu)?;
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::InvalidArgument(format!("sigma must be positive, got {sigma}")));
    }
    if n_noise == 0 {
        return Err(Error::InvalidArgument("n_noise must be >= 1".into()));
    }
    let entries = mu.len() * nu.len() * n_noise * n_noise;
    if entries > solver.cap {
        return Err(Error::SizeCapExceeded { entries, cap: solver.cap });
    }
    let nu_tag = match mode {
        NoiseMode::Independent => 1,
        NoiseMode::Shared => 0,
    };
    let a = perturb(mu, sigma, n_noise, stream.derive(0))?;
    let b = perturb(nu, sigma, n_noise, stream.derive(nu_tag))?;
    solver.wasserstein(&a, &b, 1.0)
}
