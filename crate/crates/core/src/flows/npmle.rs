//! Gradient flows for the nonparametric maximum likelihood estimator of a
//! Gaussian location mixture with identity covariance.

use rand::Rng;

use super::particles::{per_particle, reweight};
use super::{ParticleEnsemble, MAX_HALVINGS};
use crate::error::{Error, Result};
use crate::measures::{DiscreteMeasure, RngStream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NpmleMode {
    /// Positions and weights (Wasserstein–Fisher–Rao).
    #[default]
    Wfr,
    /// Positions only, weights frozen uniform.
    Wgf,
}

#[derive(Debug, Clone)]
pub struct NpmleRun {
    pub trajectory: Vec<ParticleEnsemble>,
    /// Negative log-likelihood at every recorded frame.
    pub log_likelihood: Vec<f64>,
}

fn log_phi(sq: f64, d: usize) -> f64 {
    -0.5 * sq - 0.5 * d as f64 * (2.0 * std::f64::consts::PI).ln()
}

fn sq_dist(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum()
}

/// `log sum_k w_k phi(theta_k - x_i)` for every data point.
fn log_mixture(data: &DiscreteMeasure, ens: &ParticleEnsemble) -> Vec<f64> {
    let d = data.dim();
    data.points()
        .map(|x| {
            let terms: Vec<f64> = ens
                .positions
                .iter()
                .zip(&ens.weights)
                .filter(|(_, w)| **w > 0.0)
                .map(|(t, w)| w.ln() + log_phi(sq_dist(t, x), d))
                .collect();
            let max = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            max + terms.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
        })
        .collect()
}

/// `l_n(rho) = -sum_i v_i log (phi * rho)(X_i)` with `v` the data weights.
pub fn npmle_objective(data: &DiscreteMeasure, ens: &ParticleEnsemble) -> f64 {
    -log_mixture(data, ens).iter().zip(data.weights()).map(|(l, v)| v * l).sum::<f64>()
}

fn validate(data: &DiscreteMeasure, ens: &ParticleEnsemble, dt: f64, t_end: f64) -> Result<()> {
    if data.dim() != ens.dim() {
        return Err(Error::DimensionMismatch {
            expected: data.dim(),
            found: ens.dim(),
        });
    }
    if !(dt > 0.0 && dt.is_finite()) || !(t_end >= 0.0 && t_end.is_finite()) {
        return Err(Error::InvalidArgument(format!("need dt > 0 and T >= 0, got dt = {dt}, T = {t_end}")));
    }
    ens.check_weights()
}

/// Starts from `n_particles` data points drawn with replacement.
pub fn npmle_flow(
    data: &DiscreteMeasure,
    n_particles: usize,
    dt: f64,
    t_end: f64,
    stream: &RngStream,
    mode: NpmleMode,
) -> Result<NpmleRun> {
    if n_particles == 0 {
        return Err(Error::InvalidArgument("need at least one particle".into()));
    }
    let mut rng = stream.rng();
    let positions = (0..n_particles)
        .map(|_| data.point(rng.random_range(0..data.len())).to_vec())
        .collect();
    npmle_flow_from(data, ParticleEnsemble::uniform(positions)?, dt, t_end, mode)
}

/// Integrates `round(T / dt)` Euler steps of
/// `theta_j' = -sum_i v_i (theta_j - X_i) phi(theta_j - X_i) / (phi * rho)(X_i)`
/// and, in WFR mode, `w_j' = [sum_i v_i phi(theta_j - X_i) / (phi * rho)(X_i) - 1] w_j`.
pub fn npmle_flow_from(
    data: &DiscreteMeasure,
    init: ParticleEnsemble,
    dt: f64,
    t_end: f64,
    mode: NpmleMode,
) -> Result<NpmleRun> {
    validate(data, &init, dt, t_end)?;
    let steps = (t_end / dt).round() as usize;
    let d = data.dim();
    let mut ens = init;
    if mode == NpmleMode::Wgf {
        let n = ens.len() as f64;
        ens.weights.iter_mut().for_each(|w| *w = 1.0 / n);
    }
    let mut log_likelihood = vec![npmle_objective(data, &ens)];
    let mut trajectory = vec![ens.clone()];
    for _ in 0..steps {
        let log_mix = log_mixture(data, &ens);
        // velocity_j and the responsibility mass r_j = sum_i v_i phi_ji / mix_i.
        let fields = per_particle(ens.len(), |j| {
            let theta = &ens.positions[j];
            let mut vel = vec![0.0; d];
            let mut mass = 0.0;
            for ((x, v), lm) in data.points().zip(data.weights()).zip(&log_mix) {
                let r = v * (log_phi(sq_dist(theta, x), d) - lm).exp();
                mass += r;
                for k in 0..d {
                    vel[k] -= r * (theta[k] - x[k]);
                }
            }
            (vel, mass)
        });
        let mut h = dt;
        let mut weights = ens.weights.clone();
        if mode == NpmleMode::Wfr {
            let rates: Vec<f64> = fields.iter().map(|(_, m)| m - 1.0).collect();
            let mut accepted = None;
            for _ in 0..=MAX_HALVINGS {
                if let Some(w) = reweight(&ens.weights, &rates, h) {
                    accepted = Some(w);
                    break;
                }
                h *= 0.5;
            }
            weights = accepted.ok_or(Error::StepCollapse { halvings: MAX_HALVINGS })?;
        }
        let positions = ens
            .positions
            .iter()
            .zip(&fields)
            .map(|(x, (v, _))| x.iter().zip(v).map(|(a, b)| a + h * b).collect())
            .collect();
        ens = ParticleEnsemble {
            positions,
            weights,
            time: ens.time + h,
        };
        log_likelihood.push(npmle_objective(data, &ens));
        trajectory.push(ens.clone());
    }
    Ok(NpmleRun {
        trajectory,
        log_likelihood,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(xs: &[f64]) -> DiscreteMeasure {
        DiscreteMeasure::uniform(xs.iter().map(|&x| vec![x]).collect()).unwrap()
    }

    #[test]
    fn single_particle_goes_to_the_sample_mean() {
        let data = line(&[-1.0, 0.5, 2.0, 4.5]);
        let init = ParticleEnsemble::uniform(vec![vec![-3.0]]).unwrap();
        let run = npmle_flow_from(&data, init, 0.1, 30.0, NpmleMode::Wfr).unwrap();
        let theta = run.trajectory.last().unwrap().positions[0][0];
        assert!((theta - 1.5).abs() < 1e-8, "{theta}");
    }

    #[test]
    fn objective_of_a_point_mass() {
        let data = line(&[0.0, 2.0]);
        let ens = ParticleEnsemble::uniform(vec![vec![1.0]]).unwrap();
        let expected = 0.5 + 0.5 * (2.0 * std::f64::consts::PI).ln();
        assert!((npmle_objective(&data, &ens) - expected).abs() < 1e-14);
    }

    #[test]
    fn wgf_mode_keeps_uniform_weights() {
        let data = line(&[-5.0, -4.0, 4.5, 5.0]);
        let run = npmle_flow(&data, 4, 0.05, 1.0, &RngStream::new(3, 0), NpmleMode::Wgf).unwrap();
        for frame in &run.trajectory {
            assert!(frame.weights.iter().all(|w| *w == 0.25));
        }
    }
}
