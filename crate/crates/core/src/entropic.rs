//! Entropic optimal transport by log-domain Sinkhorn iterations.

use nalgebra::DMatrix;
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::measures::{check_same_dim, pow_dist, DiscreteMeasure};

/// Solver settings. Only the quadratic cost is supported.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SinkhornParams {
    pub eps: f64,
    /// Target for the L1 residual of the column marginal.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SinkhornParams {
    fn default() -> Self {
        Self {
            eps: 0.1,
            tol: 1e-9,
            max_iter: 100_000,
        }
    }
}

impl SinkhornParams {
    pub fn new(eps: f64, tol: f64) -> Self {
        Self {
            eps,
            tol,
            ..Self::default()
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.eps > 0.0 && self.eps.is_finite()) {
            return Err(Error::InvalidArgument("eps must be positive".into()));
        }
        if !(self.tol > 0.0) {
            return Err(Error::InvalidArgument("tol must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SinkhornResult {
    pub dual_f: Vec<f64>,
    pub dual_g: Vec<f64>,
    /// `exp((f_i + g_j - C_ij) / eps) p_i q_j`.
    pub plan: DMatrix<f64>,
    /// `<C, plan>`.
    pub transport_cost: f64,
    /// `<C, plan> + eps KL(plan | p x q)`.
    pub primal_value: f64,
    /// `sum f p + sum g q - eps (mass(plan) - 1)`.
    pub dual_value: f64,
    pub iterations: usize,
    pub marginal_residual: f64,
    pub converged: bool,
    /// Dual value after every iteration.
    pub dual_trace: Vec<f64>,
    pub eps: f64,
}

impl SinkhornResult {
    /// Turns an unconverged run into `NoConvergence`.
    pub fn ensure_converged(self) -> Result<Self> {
        if self.converged {
            Ok(self)
        } else {
            Err(Error::NoConvergence {
                iterations: self.iterations,
                residual: self.marginal_residual,
            })
        }
    }

    pub fn to_json(&self) -> Value {
        json!({
            "dual_f": self.dual_f,
            "dual_g": self.dual_g,
            "transport_cost": self.transport_cost,
            "primal_value": self.primal_value,
            "dual_value": self.dual_value,
            "iterations": self.iterations,
            "marginal_residual": self.marginal_residual,
            "converged": self.converged,
            "eps": self.eps,
        })
    }
}

fn log_sum_exp(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = values.clone().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + values.map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// Quadratic cost matrix, row-major.
fn quadratic_costs(mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Vec<f64> {
    mu.points()
        .flat_map(|x| nu.points().map(move |y| pow_dist(x, y, 2.0)))
        .collect()
}

/// Gibbs plan `exp((f_i + g_j - C_ij)/eps) p_i q_j` for potentials `(f, g)`.
pub fn plan_from_duals(f: &[f64], g: &[f64], costs: &DMatrix<f64>, p: &[f64], q: &[f64], eps: f64) -> DMatrix<f64> {
    DMatrix::from_fn(f.len(), g.len(), |i, j| {
        ((f[i] + g[j] - costs[(i, j)]) / eps).exp() * p[i] * q[j]
    })
}

/// `<C, P> + eps KL(P | p x q)` with the generalized KL divergence.
pub fn entropic_primal(plan: &DMatrix<f64>, costs: &DMatrix<f64>, p: &[f64], q: &[f64], eps: f64) -> f64 {
    let mut total = 0.0;
    for i in 0..plan.nrows() {
        for j in 0..plan.ncols() {
            let (x, pq) = (plan[(i, j)], p[i] * q[j]);
            total += x * costs[(i, j)] + eps * pq;
            if x > 0.0 {
                total += eps * (x * (x / pq).ln() - x);
            }
        }
    }
    total
}

/// Alternating updates
/// `g_j = -eps log sum_i p_i exp((f_i - C_ij)/eps)` and
/// `f_i = -eps log sum_j q_j exp((g_j - C_ij)/eps)` from `f = 0`, stopping when
/// the L1 residual of the column marginal is at most `tol`.
pub fn sinkhorn(mu: &DiscreteMeasure, nu: &DiscreteMeasure, params: SinkhornParams) -> Result<SinkhornResult> {
    check_same_dim(mu, nu)?;
    params.validate()?;
    let (n, m) = (mu.len(), nu.len());
    let eps = params.eps;
    let c = quadratic_costs(mu, nu);
    let mut c_t = vec![0.0; n * m];
    for i in 0..n {
        for j in 0..m {
            c_t[j * n + i] = c[i * m + j];
        }
    }
    let log_p: Vec<f64> = mu.weights().iter().map(|w| w.ln()).collect();
    let log_q: Vec<f64> = nu.weights().iter().map(|w| w.ln()).collect();
    let q = nu.weights();

    let mut f = vec![0.0; n];
    let mut g = vec![0.0; m];
    let mut h = vec![0.0; m];
    let mut trace = Vec::new();
    let mut iterations = 0;
    let mut converged = false;
    loop {
        for j in 0..m {
            let col = &c_t[j * n..(j + 1) * n];
            h[j] = -eps * log_sum_exp((0..n).map(|i| log_p[i] + (f[i] - col[i]) / eps));
        }
        if iterations > 0 {
            // Column sums of the current plan are q_j exp((g_j - h_j)/eps).
            let residual: f64 = (0..m).map(|j| q[j] * (((g[j] - h[j]) / eps).exp() - 1.0).abs()).sum();
            if residual <= params.tol {
                converged = true;
                break;
            }
        }
        if iterations == params.max_iter {
            break;
        }
        g.copy_from_slice(&h);
        for i in 0..n {
            let row = &c[i * m..(i + 1) * m];
            f[i] = -eps * log_sum_exp((0..m).map(|j| log_q[j] + (g[j] - row[j]) / eps));
        }
        iterations += 1;
        let dual: f64 = f.iter().zip(mu.weights()).map(|(a, b)| a * b).sum::<f64>()
            + g.iter().zip(q).map(|(a, b)| a * b).sum::<f64>();
        trace.push(dual);
    }

    let costs = DMatrix::from_row_slice(n, m, &c);
    let plan = plan_from_duals(&f, &g, &costs, mu.weights(), q, eps);
    let mass: f64 = plan.sum();
    let row_res: f64 = plan.row_iter().zip(mu.weights()).map(|(r, w)| (r.sum() - w).abs()).sum();
    let col_res: f64 = plan.column_iter().zip(q).map(|(c, w)| (c.sum() - w).abs()).sum();
    let transport_cost = plan.component_mul(&costs).sum();
    let primal_value = f
        .iter()
        .enumerate()
        .map(|(i, fi)| (0..m).map(|j| plan[(i, j)] * (fi + g[j])).sum::<f64>())
        .sum::<f64>()
        - eps * (mass - 1.0);
    let dual_value = f.iter().zip(mu.weights()).map(|(a, b)| a * b).sum::<f64>()
        + g.iter().zip(q).map(|(a, b)| a * b).sum::<f64>()
        - eps * (mass - 1.0);
    Ok(SinkhornResult {
        dual_f: f,
        dual_g: g,
        plan,
        transport_cost,
        primal_value,
        dual_value,
        iterations,
        marginal_residual: row_res.max(col_res),
        converged,
        dual_trace: trace,
        eps,
    })
}

/// `max_j | sum_i p_i exp((f_i + g_j - C_ij)/eps) - 1 |`.
pub fn schrodinger_residual(result: &SinkhornResult, mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> f64 {
    let eps = result.eps;
    let mut worst: f64 = 0.0;
    for (j, y) in nu.points().enumerate() {
        let s: f64 = mu
            .points()
            .zip(mu.weights())
            .zip(&result.dual_f)
            .map(|((x, p), f)| p * ((f + result.dual_g[j] - pow_dist(x, y, 2.0)) / eps).exp())
            .sum();
        worst = worst.max((s - 1.0).abs());
    }
    worst
}

/// Conditional mean `sum_j y_j P_ij / p_i` of the entropic plan at each `x_i`.
pub fn entropic_map(result: &SinkhornResult, mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Vec<Vec<f64>> {
    let d = nu.dim();
    (0..mu.len())
        .map(|i| {
            let mut out = vec![0.0; d];
            for (j, y) in nu.points().enumerate() {
                let w = result.plan[(i, j)] / mu.weights()[i];
                for k in 0..d {
                    out[k] += w * y[k];
                }
            }
            out
        })
        .collect()
}

/// `S(mu, nu) - (S(mu, mu) + S(nu, nu)) / 2` with `S` the entropic primal value.
pub fn sinkhorn_divergence(mu: &DiscreteMeasure, nu: &DiscreteMeasure, params: SinkhornParams) -> Result<f64> {
    let (cross, (self_mu, self_nu)) = rayon::join(
        || sinkhorn(mu, nu, params),
        || rayon::join(|| sinkhorn(mu, mu, params), || sinkhorn(nu, nu, params)),
    );
    let cross = cross?.ensure_converged()?;
    let self_mu = self_mu?.ensure_converged()?;
    let self_nu = self_nu?.ensure_converged()?;
    Ok(cross.primal_value - 0.5 * (self_mu.primal_value + self_nu.primal_value))
}
