//! Constructive upper and lower bounds on `W_1` for measures on the unit cube:
//! dyadic partitions, truncated Fourier series and Lipschitz witnesses.

use std::collections::BTreeMap;

use num_complex::Complex64;
use rand::Rng;
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::measures::{check_same_dim, sample_with, DiscreteMeasure, Measure, RngStream};
use crate::surrogate::mean_and_se;

fn check_unit_cube(mu: &DiscreteMeasure) -> Result<()> {
    if let Some(x) = mu.points().find(|x| x.iter().any(|v| !(0.0..=1.0).contains(v))) {
        return Err(Error::SupportOutOfRange(x.to_vec()));
    }
    Ok(())
}

/// Masses of both measures on the dyadic cubes of each level `0..=depth`.
/// Level `j` cubes are `prod [k 2^-j, (k+1) 2^-j)`, with the face at 1 folded
/// into the last cube.
#[derive(Debug, Clone, PartialEq)]
pub struct DyadicDecomposition {
    pub depth: u32,
    pub levels: Vec<BTreeMap<Vec<u64>, (f64, f64)>>,
}

/// Index of the level-`j` cube containing `x`.
pub fn cube_index(x: &[f64], j: u32) -> Vec<u64> {
    let side = (1u64 << j) as f64;
    let last = (1u64 << j) - 1;
    x.iter().map(|&v| ((v * side).floor() as u64).min(last)).collect()
}

pub fn dyadic_decomposition(mu: &DiscreteMeasure, nu: &DiscreteMeasure, depth: u32) -> Result<DyadicDecomposition> {
    check_same_dim(mu, nu)?;
    check_unit_cube(mu)?;
    check_unit_cube(nu)?;
    if depth > 52 {
        return Err(Error::InvalidArgument(format!("depth {depth} exceeds double precision")));
    }
    let mut levels = Vec::with_capacity(depth as usize + 1);
    for j in 0..=depth {
        let mut cubes: BTreeMap<Vec<u64>, (f64, f64)> = BTreeMap::new();
        for (x, w) in mu.points().zip(mu.weights()) {
            cubes.entry(cube_index(x, j)).or_default().0 += w;
        }
        for (y, w) in nu.points().zip(nu.weights()) {
            cubes.entry(cube_index(y, j)).or_default().1 += w;
        }
        levels.push(cubes);
    }
    Ok(DyadicDecomposition { depth, levels })
}

/// `sqrt(d) (sum_{j<J} 2^-j sum_{Q in level j+1} |mu(Q) - nu(Q)| + 2^-J)`.
pub fn dyadic_upper_bound(mu: &DiscreteMeasure, nu: &DiscreteMeasure, depth: u32) -> Result<f64> {
    let dec = dyadic_decomposition(mu, nu, depth)?;
    let mut total = 0.0;
    for j in 0..depth {
        let level_sum: f64 = dec.levels[j as usize + 1].values().map(|(a, b)| (a - b).abs()).sum();
        total += level_sum * 0.5f64.powi(j as i32);
    }
    total += 0.5f64.powi(depth as i32);
    Ok((mu.dim() as f64).sqrt() * total)
}

/// Characteristic function `phi(m) = sum_i w_i exp(i <m, x_i>)` on the integer
/// frequencies with `||m|| <= radius`, in lexicographic order.
#[derive(Debug, Clone, PartialEq)]
pub struct FourierCoefficients {
    pub radius: f64,
    pub dim: usize,
    pub frequencies: Vec<Vec<i64>>,
    pub values: Vec<Complex64>,
}

impl FourierCoefficients {
    pub fn get(&self, m: &[i64]) -> Option<Complex64> {
        self.frequencies
            .binary_search_by(|f| f.as_slice().cmp(m))
            .ok()
            .map(|k| self.values[k])
    }

    pub fn to_json(&self) -> Value {
        let entries: Vec<Value> = self
            .frequencies
            .iter()
            .zip(&self.values)
            .map(|(m, v)| json!({ "m": m, "re": v.re, "im": v.im }))
            .collect();
        json!({ "radius": self.radius, "dim": self.dim, "coefficients": entries })
    }
}

/// Integer vectors with `||m|| <= radius`, lexicographically sorted.
pub fn lattice_ball(dim: usize, radius: f64) -> Vec<Vec<i64>> {
    let r = radius.max(0.0).floor() as i64;
    let r2 = radius * radius;
    let mut out = Vec::new();
    let mut m = vec![-r; dim];
    loop {
        if m.iter().map(|&v| (v * v) as f64).sum::<f64>() <= r2 {
            out.push(m.clone());
        }
        let mut k = dim;
        loop {
            if k == 0 {
                return out;
            }
            k -= 1;
            if m[k] < r {
                m[k] += 1;
                for v in m.iter_mut().skip(k + 1) {
                    *v = -r;
                }
                break;
            }
        }
    }
}

pub fn fourier_coefficients(mu: &DiscreteMeasure, radius: f64) -> Result<FourierCoefficients> {
    check_unit_cube(mu)?;
    if !(radius >= 0.0 && radius.is_finite()) {
        return Err(Error::InvalidArgument(format!("truncation radius must be >= 0, got {radius}")));
    }
    let frequencies = lattice_ball(mu.dim(), radius);
    let values = frequencies
        .iter()
        .map(|m| {
            mu.points()
                .zip(mu.weights())
                .map(|(x, w)| {
                    let phase: f64 = m.iter().zip(x).map(|(&mk, xk)| mk as f64 * xk).sum();
                    Complex64::from_polar(*w, phase)
                })
                .sum()
        })
        .collect();
    Ok(FourierCoefficients {
        radius,
        dim: mu.dim(),
        frequencies,
        values,
    })
}

/// Empirical coefficients of a sample; the truncated Fourier density estimator.
pub fn fourier_density_estimate(samples: &DiscreteMeasure, radius: f64) -> Result<FourierCoefficients> {
    fourier_coefficients(samples, radius)
}

/// Parts of the smoothed Fourier bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FourierBound {
    /// `sqrt(sum_{0 < ||m|| <= M} ||m||^-2 e^{-eps ||m||^2} |dphi(m)|^2)`
    pub head: f64,
    /// `2 sqrt(d eps)`
    pub smoothing: f64,
    /// Certified bound on the omitted frequencies, using `|dphi| <= 2`.
    pub tail: f64,
    pub value: f64,
    pub eps: f64,
}

impl FourierBound {
    pub fn to_json(&self) -> Value {
        json!({ "value": self.value, "head": self.head, "smoothing": self.smoothing, "tail": self.tail, "eps": self.eps })
    }
}

fn ball_volume(dim: usize, r: f64) -> f64 {
    match dim {
        0 => 1.0,
        1 => 2.0 * r,
        _ => 2.0 * std::f64::consts::PI / dim as f64 * r * r * ball_volume(dim - 2, r),
    }
}

/// Upper bound on `sqrt(sum_{||m|| > M} 4 ||m||^-2 e^{-eps ||m||^2})`.
///
/// Lattice points with `k <= ||m|| < k + 1` are counted by the volume of the
/// shell widened by half a cube diagonal on each side.
pub fn fourier_tail_bound(dim: usize, radius: f64, eps: f64) -> f64 {
    let half_diag = (dim as f64).sqrt() / 2.0;
    let mut total = 0.0;
    let mut k = radius.floor() as u64;
    let settle = ((dim as f64 + 1.0) / eps).sqrt();
    loop {
        let kf = k as f64;
        let shell = ball_volume(dim, kf + 1.0 + half_diag) - ball_volume(dim, (kf - half_diag).max(0.0));
        // Nonzero frequencies have norm at least 1.
        let r = kf.max(radius).max(1.0);
        let term = 4.0 * shell * (-eps * r * r).exp() / (r * r);
        total += term;
        if kf > settle && term <= 1e-17 * total {
            break;
        }
        k += 1;
    }
    total.sqrt()
}

/// Smoothed Fourier upper bound on `W_1` (equal to the periodic distance on
/// the unit cube), plus the certified truncation tail.
pub fn fourier_upper_bound(
    phi_mu: &FourierCoefficients,
    phi_nu: &FourierCoefficients,
    eps: f64,
) -> Result<FourierBound> {
    if phi_mu.radius != phi_nu.radius {
        return Err(Error::MismatchedTruncation(phi_mu.radius, phi_nu.radius));
    }
    if phi_mu.dim != phi_nu.dim {
        return Err(Error::DimensionMismatch {
            expected: phi_mu.dim,
            found: phi_nu.dim,
        });
    }
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::InvalidArgument(format!("eps must be positive, got {eps}")));
    }
    let mut head = 0.0;
    for ((m, a), b) in phi_mu.frequencies.iter().zip(&phi_mu.values).zip(&phi_nu.values) {
        let norm2: f64 = m.iter().map(|&v| (v * v) as f64).sum();
        if norm2 == 0.0 {
            continue;
        }
        head += (-eps * norm2).exp() / norm2 * (a - b).norm_sqr();
    }
    let head = head.sqrt();
    let smoothing = 2.0 * (phi_mu.dim as f64 * eps).sqrt();
    let tail = fourier_tail_bound(phi_mu.dim, phi_mu.radius, eps);
    Ok(FourierBound {
        head,
        smoothing,
        tail,
        value: head + smoothing + tail,
        eps,
    })
}

/// Evaluates the bound on each `eps` and returns all of them with the index
/// of the smallest.
pub fn fourier_upper_bound_grid(
    phi_mu: &FourierCoefficients,
    phi_nu: &FourierCoefficients,
    eps_grid: &[f64],
) -> Result<(Vec<FourierBound>, usize)> {
    let bounds: Vec<FourierBound> = eps_grid
        .iter()
        .map(|&e| fourier_upper_bound(phi_mu, phi_nu, e))
        .collect::<Result<_>>()?;
    let best = (0..bounds.len())
        .min_by(|&a, &b| bounds[a].value.total_cmp(&bounds[b].value))
        .ok_or_else(|| Error::InvalidArgument("empty eps grid".into()))?;
    Ok((bounds, best))
}

/// Reference law for the Lipschitz witness.
#[derive(Debug, Clone, PartialEq)]
pub enum Reference {
    UnitCube { dim: usize },
    Law(Measure),
}

impl Reference {
    fn dim(&self) -> usize {
        match self {
            Reference::UnitCube { dim } => *dim,
            Reference::Law(m) => m.dim(),
        }
    }
}

/// Monte Carlo witness lower bound on `W_1(candidate, reference)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LowerBound {
    /// Estimate of `int dist(x, supp candidate) d reference(x)`.
    pub estimate: f64,
    pub se: f64,
    /// `estimate - 3 se`.
    pub conservative: f64,
}

impl LowerBound {
    pub fn to_json(&self) -> Value {
        json!({ "estimate": self.estimate, "se": self.se, "conservative": self.conservative })
    }
}

/// The witness `f(x) = dist(x, supp candidate)` is 1-Lipschitz and vanishes on
/// the candidate, so `int f d reference <= W_1(candidate, reference)`.
pub fn lipschitz_lower_bound(
    candidate: &DiscreteMeasure,
    reference: &Reference,
    n_mc: usize,
    stream: &RngStream,
) -> Result<LowerBound> {
    if reference.dim() != candidate.dim() {
        return Err(Error::DimensionMismatch {
            expected: candidate.dim(),
            found: reference.dim(),
        });
    }
    if n_mc == 0 {
        return Err(Error::InvalidArgument("n_mc must be >= 1".into()));
    }
    let mut rng = stream.rng();
    let draws = match reference {
        Reference::UnitCube { dim } => {
            let coords: Vec<f64> = (0..n_mc * dim).map(|_| rng.random::<f64>()).collect();
            DiscreteMeasure::uniform_flat(*dim, coords)?
        }
        Reference::Law(m) => sample_with(m, n_mc, &mut rng)?,
    };
    let dists: Vec<f64> = draws
        .points()
        .map(|y| {
            candidate
                .points()
                .map(|x| x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>())
                .fold(f64::INFINITY, f64::min)
                .sqrt()
        })
        .collect();
    let (estimate, se) = mean_and_se(&dists);
    Ok(LowerBound {
        estimate,
        se,
        conservative: estimate - 3.0 * se,
    })
}
