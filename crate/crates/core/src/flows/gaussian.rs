//! Flows over Gaussian parameters: Bures–Wasserstein variational inference and
//! Gaussian-mixture particles.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;

use super::particles::reweight;
use super::{Potential, MAX_HALVINGS};
use crate::error::{Error, Result};
use crate::linalg;
use crate::measures::{GaussianMeasure, RngStream};

/// Spectrum floor applied to covariances after every step.
pub const EIG_FLOOR: f64 = 1e-12;

/// How expectations under a Gaussian are approximated.
#[derive(Debug, Clone, PartialEq)]
pub enum Expectation {
    /// Tensor Gauss–Hermite rule with `order` nodes per axis.
    Quadrature { order: usize },
    /// The same `draws` standard normal vectors, reused at every step.
    MonteCarlo { draws: usize, stream: RngStream },
}

impl Expectation {
    /// Order-20 quadrature up to dimension 3, 512 Monte Carlo draws beyond.
    pub fn auto(dim: usize, stream: &RngStream) -> Self {
        if dim <= 3 {
            Expectation::Quadrature { order: 20 }
        } else {
            Expectation::MonteCarlo {
                draws: 512,
                stream: stream.clone(),
            }
        }
    }

    /// Standard normal nodes and weights in dimension `d`.
    fn nodes(&self, d: usize) -> Result<(Vec<DVector<f64>>, Vec<f64>)> {
        match self {
            Expectation::Quadrature { order } => {
                if *order == 0 {
                    return Err(Error::InvalidArgument("quadrature order must be >= 1".into()));
                }
                let (x, w) = gauss_hermite(*order);
                let total = order.checked_pow(d as u32).filter(|t| *t <= 1 << 20).ok_or_else(|| {
                    Error::InvalidArgument(format!("{order}^{d} quadrature nodes is too many; use Monte Carlo"))
                })?;
                let mut nodes = Vec::with_capacity(total);
                let mut weights = Vec::with_capacity(total);
                for mut flat in 0..total {
                    let mut z = DVector::zeros(d);
                    let mut weight = 1.0;
                    for k in 0..d {
                        let idx = flat % order;
                        flat /= order;
                        z[k] = x[idx];
                        weight *= w[idx];
                    }
                    nodes.push(z);
                    weights.push(weight);
                }
                Ok((nodes, weights))
            }
            Expectation::MonteCarlo { draws, stream } => {
                if *draws == 0 {
                    return Err(Error::InvalidArgument("need at least one Monte Carlo draw".into()));
                }
                let mut rng = stream.rng();
                let nodes = (0..*draws)
                    .map(|_| DVector::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal)))
                    .collect();
                Ok((nodes, vec![1.0 / *draws as f64; *draws]))
            }
        }
    }
}

/// Gauss–Hermite rule for the standard normal (probabilists' weight), by the
/// Golub–Welsch eigenvalue method. Nodes ascend and are made exactly symmetric.
pub fn gauss_hermite(order: usize) -> (Vec<f64>, Vec<f64>) {
    let n = order;
    let mut jacobi = DMatrix::zeros(n, n);
    for k in 1..n {
        let b = (k as f64).sqrt();
        jacobi[(k - 1, k)] = b;
        jacobi[(k, k - 1)] = b;
    }
    let eig = SymmetricEigen::new(jacobi);
    let mut pairs: Vec<(f64, f64)> = (0..n)
        .map(|i| (eig.eigenvalues[i], eig.eigenvectors[(0, i)].powi(2)))
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut x: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let mut w: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    for i in 0..n / 2 {
        let j = n - 1 - i;
        let xs = 0.5 * (x[j] - x[i]);
        let ws = 0.5 * (w[i] + w[j]);
        x[i] = -xs;
        x[j] = xs;
        w[i] = ws;
        w[j] = ws;
    }
    if n % 2 == 1 {
        x[n / 2] = 0.0;
    }
    let total: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= total);
    (x, w)
}

fn check_step(dt: f64, t_end: f64) -> Result<usize> {
    if !(dt > 0.0 && dt.is_finite()) || !(t_end >= 0.0 && t_end.is_finite()) {
        return Err(Error::InvalidArgument(format!("need dt > 0 and T >= 0, got dt = {dt}, T = {t_end}")));
    }
    Ok((t_end / dt).round() as usize)
}

fn check_positive_definite(g: &GaussianMeasure) -> Result<()> {
    let min_eigenvalue = linalg::min_eigenvalue(g.cov());
    if min_eigenvalue <= 0.0 {
        return Err(Error::SingularCovariance { min_eigenvalue });
    }
    Ok(())
}

/// Nodes `m + S^{1/2} z` for the Gaussian `N(m, S)`.
fn place(g: &GaussianMeasure, nodes: &[DVector<f64>]) -> Vec<Vec<f64>> {
    let root = linalg::sqrtm(g.cov());
    nodes.iter().map(|z| (g.mean() + &root * z).iter().copied().collect()).collect()
}

/// `KL(q | pi) - log Z` for `pi = exp(-V) / Z`, i.e. `E_q V - log det(2 pi e S) / 2`.
pub fn kl_up_to_constant(target: &Potential, q: &GaussianMeasure, expectation: &Expectation) -> Result<f64> {
    let d = q.dim();
    let (nodes, weights) = expectation.nodes(d)?;
    let ev: f64 = place(q, &nodes).iter().zip(&weights).map(|(x, w)| w * target.value(x)).sum();
    let two_pi_e = 2.0 * std::f64::consts::PI * std::f64::consts::E;
    Ok(ev - 0.5 * (d as f64 * two_pi_e.ln() + linalg::log_det_spd(q.cov())))
}

/// Euler step `S + dt (-H S - S H + extra I)`, symmetrized and clamped.
fn covariance_step(cov: &DMatrix<f64>, h: &DMatrix<f64>, extra: f64, dt: f64) -> (DMatrix<f64>, bool) {
    let d = cov.nrows();
    let drift = -(h * cov) - cov * h + DMatrix::identity(d, d) * extra;
    linalg::clamp_spectrum(&linalg::symmetrize(&(cov + drift * dt)), EIG_FLOOR)
}

fn psd_guard(clamped: usize, steps: usize) -> Result<()> {
    if steps > 0 && clamped as f64 > 0.01 * steps as f64 {
        return Err(Error::PsdLost { clamped, steps });
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct BwViRun {
    pub times: Vec<f64>,
    pub states: Vec<GaussianMeasure>,
    /// `KL(q_t | pi)` up to the constant `log Z`, per state.
    pub kl: Vec<f64>,
    pub clamped_steps: usize,
}

/// Euler integration of `m' = -E grad V(X)`, `S' = -E hess V(X) S - S E hess V(X) + 2I`
/// with `X ~ N(m, S)`.
pub fn bw_vi_flow(
    target: &Potential,
    init: &GaussianMeasure,
    dt: f64,
    t_end: f64,
    expectation: &Expectation,
) -> Result<BwViRun> {
    let steps = check_step(dt, t_end)?;
    check_positive_definite(init)?;
    let d = init.dim();
    let (nodes, weights) = expectation.nodes(d)?;
    let mut state = init.clone();
    let mut run = BwViRun {
        times: vec![0.0],
        states: vec![state.clone()],
        kl: vec![kl_up_to_constant(target, &state, expectation)?],
        clamped_steps: 0,
    };
    for step in 1..=steps {
        let mut grad = DVector::zeros(d);
        let mut hess = DMatrix::zeros(d, d);
        for (x, w) in place(&state, &nodes).iter().zip(&weights) {
            grad += DVector::from_vec(target.gradient(x)) * *w;
            hess += target.hessian(x) * *w;
        }
        let hess = linalg::symmetrize(&hess);
        let mean = state.mean() - grad * dt;
        let (cov, fired) = covariance_step(state.cov(), &hess, 2.0, dt);
        run.clamped_steps += fired as usize;
        state = GaussianMeasure::new(mean, cov)?;
        run.times.push(step as f64 * dt);
        run.kl.push(kl_up_to_constant(target, &state, expectation)?);
        run.states.push(state.clone());
    }
    psd_guard(run.clamped_steps, steps)?;
    Ok(run)
}

/// Finite Gaussian mixture `sum_k w_k N(m_k, S_k)` treated as a particle system.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianParticleEnsemble {
    pub components: Vec<GaussianMeasure>,
    pub weights: Vec<f64>,
    pub time: f64,
}

impl GaussianParticleEnsemble {
    pub fn new(components: Vec<GaussianMeasure>, weights: Vec<f64>) -> Result<Self> {
        if components.is_empty() || components.len() != weights.len() {
            return Err(Error::Invariant("need one weight per component and at least one component".into()));
        }
        let d = components[0].dim();
        if let Some(c) = components.iter().find(|c| c.dim() != d) {
            return Err(Error::DimensionMismatch { expected: d, found: c.dim() });
        }
        let sum: f64 = weights.iter().sum();
        if weights.iter().any(|w| !(*w >= 0.0)) || (sum - 1.0).abs() > super::WEIGHT_SUM_TOL {
            return Err(Error::Invariant(format!("mixture weights must be a probability vector (sum {sum})")));
        }
        Ok(Self {
            components,
            weights,
            time: 0.0,
        })
    }

    pub fn uniform(components: Vec<GaussianMeasure>) -> Result<Self> {
        let k = components.len().max(1);
        Self::new(components, vec![1.0 / k as f64; k])
    }

    pub fn dim(&self) -> usize {
        self.components[0].dim()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MixtureWeights {
    #[default]
    Fixed,
    /// Fisher–Rao weight dynamics centered by the plain component average.
    Wfr,
}

#[derive(Debug, Clone)]
pub struct MixtureRun {
    pub states: Vec<GaussianParticleEnsemble>,
    pub clamped_steps: usize,
}

/// Precomputed pieces of the mixture log density.
struct MixtureDensity {
    log_w: Vec<f64>,
    means: Vec<DVector<f64>>,
    precisions: Vec<DMatrix<f64>>,
    log_norm: Vec<f64>,
}

impl MixtureDensity {
    fn new(ens: &GaussianParticleEnsemble) -> Self {
        let d = ens.dim() as f64;
        let ln_2pi = (2.0 * std::f64::consts::PI).ln();
        Self {
            log_w: ens.weights.iter().map(|w| w.ln()).collect(),
            means: ens.components.iter().map(|c| c.mean().clone()).collect(),
            precisions: ens.components.iter().map(|c| linalg::inv_sym(c.cov())).collect(),
            log_norm: ens
                .components
                .iter()
                .map(|c| -0.5 * (d * ln_2pi + linalg::log_det_spd(c.cov())))
                .collect(),
        }
    }

    /// `log G(x)`, `grad log G(x)` and `hess log G(x)`.
    fn log_density_derivatives(&self, x: &DVector<f64>) -> (f64, DVector<f64>, DMatrix<f64>) {
        let k = self.means.len();
        let d = x.len();
        let mut logs = Vec::with_capacity(k);
        let mut scores = Vec::with_capacity(k);
        for c in 0..k {
            if self.log_w[c] == f64::NEG_INFINITY {
                logs.push(f64::NEG_INFINITY);
                scores.push(DVector::zeros(d));
                continue;
            }
            let r = x - &self.means[c];
            let s = -(&self.precisions[c] * &r);
            logs.push(self.log_w[c] + self.log_norm[c] + 0.5 * r.dot(&s));
            scores.push(s);
        }
        let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let log_g = max + logs.iter().map(|l| (l - max).exp()).sum::<f64>().ln();
        let mut grad = DVector::zeros(d);
        let mut hess = DMatrix::zeros(d, d);
        for c in 0..k {
            let r = (logs[c] - log_g).exp();
            if r == 0.0 {
                continue;
            }
            grad += &scores[c] * r;
            hess += (&scores[c] * scores[c].transpose() - &self.precisions[c]) * r;
        }
        hess -= &grad * grad.transpose();
        (log_g, grad, hess)
    }
}

/// Flow of `nu -> KL(G_nu | pi)` over mixing measures, with
/// `dF(G)(x) = V(x) + log G(x)`: each component moves by
/// `m' = -E grad dF`, `S' = -E hess dF S - S E hess dF`, expectations under its own
/// Gaussian. In WFR mode weights follow `-(E_k dF - mean_k E_k dF) w_k`,
/// renormalized and step-halved like [`super::wfr_step`].
pub fn gaussian_mixture_flow(
    target: &Potential,
    init: &GaussianParticleEnsemble,
    dt: f64,
    t_end: f64,
    expectation: &Expectation,
    mode: MixtureWeights,
) -> Result<MixtureRun> {
    let steps = check_step(dt, t_end)?;
    for c in &init.components {
        check_positive_definite(c)?;
    }
    let d = init.dim();
    let k = init.components.len();
    let (nodes, weights) = expectation.nodes(d)?;
    let mut state = init.clone();
    let mut run = MixtureRun {
        states: vec![state.clone()],
        clamped_steps: 0,
    };
    for _ in 0..steps {
        let density = MixtureDensity::new(&state);
        let mut grads = Vec::with_capacity(k);
        let mut hessians = Vec::with_capacity(k);
        let mut values = Vec::with_capacity(k);
        for comp in &state.components {
            let mut g = DVector::zeros(d);
            let mut h = DMatrix::zeros(d, d);
            let mut v = 0.0;
            for (x, w) in place(comp, &nodes).iter().zip(&weights) {
                let xv = DVector::from_column_slice(x);
                let (log_g, grad_log, hess_log) = density.log_density_derivatives(&xv);
                g += (DVector::from_vec(target.gradient(x)) + grad_log) * *w;
                h += (target.hessian(x) + hess_log) * *w;
                v += w * (target.value(x) + log_g);
            }
            grads.push(g);
            hessians.push(linalg::symmetrize(&h));
            values.push(v);
        }
        let mut h = dt;
        let mut new_weights = state.weights.clone();
        if mode == MixtureWeights::Wfr {
            let avg = values.iter().sum::<f64>() / k as f64;
            let rates: Vec<f64> = values.iter().map(|v| -(v - avg)).collect();
            let mut accepted = None;
            for _ in 0..=MAX_HALVINGS {
                if let Some(w) = reweight(&state.weights, &rates, h) {
                    accepted = Some(w);
                    break;
                }
                h *= 0.5;
            }
            new_weights = accepted.ok_or(Error::StepCollapse { halvings: MAX_HALVINGS })?;
        }
        let mut fired_any = false;
        let mut components = Vec::with_capacity(k);
        for c in 0..k {
            let comp = &state.components[c];
            let mean = comp.mean() - &grads[c] * h;
            let (cov, fired) = covariance_step(comp.cov(), &hessians[c], 0.0, h);
            fired_any |= fired;
            components.push(GaussianMeasure::new(mean, cov)?);
        }
        run.clamped_steps += fired_any as usize;
        state = GaussianParticleEnsemble {
            components,
            weights: new_weights,
            time: state.time + h,
        };
        run.states.push(state.clone());
    }
    psd_guard(run.clamped_steps, steps)?;
    Ok(run)
}
