//! Wasserstein barycenters: the one-dimensional quantile average, the
//! free-support fixed point and variance-equality diagnostics.

use rayon::prelude::*;
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::exact::ExactSolver;
use crate::measures::DiscreteMeasure;
use crate::plan::TransportPlan;
use crate::univariate::{quantile_cost, QuantileFunction};

fn check_inputs(measures: &[DiscreteMeasure], weights: &[f64]) -> Result<()> {
    if measures.is_empty() || measures.len() != weights.len() {
        return Err(Error::InvalidArgument(format!(
            "{} weights for {} input measures",
            weights.len(),
            measures.len()
        )));
    }
    if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) || (weights.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidArgument("barycenter weights must be a probability vector".into()));
    }
    let d = measures[0].dim();
    if let Some(m) = measures.iter().find(|m| m.dim() != d) {
        return Err(Error::DimensionMismatch { expected: d, found: m.dim() });
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct Barycenter1d {
    pub quantile: QuantileFunction,
    pub measure: DiscreteMeasure,
}

/// The `W_2` barycenter on the line: its quantile function is
/// `sum_k w_k F_k^dagger`, evaluated on the union of all breakpoints.
pub fn barycenter_1d(measures: &[DiscreteMeasure], weights: &[f64]) -> Result<Barycenter1d> {
    check_inputs(measures, weights)?;
    if measures[0].dim() != 1 {
        return Err(Error::DimensionMismatch {
            expected: 1,
            found: measures[0].dim(),
        });
    }
    let quantiles = measures.iter().map(QuantileFunction::from_measure).collect::<Result<Vec<_>>>()?;
    let mut grid: Vec<f64> = quantiles.iter().flat_map(|q| q.levels.iter().copied()).collect();
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    let mut levels: Vec<f64> = Vec::with_capacity(grid.len());
    let mut values: Vec<f64> = Vec::with_capacity(grid.len());
    for u in grid {
        // Offsets from the first input keep identical inputs exact.
        let base = quantiles[0].eval(u);
        let v = base + quantiles.iter().zip(weights).map(|(q, w)| w * (q.eval(u) - base)).sum::<f64>();
        if values.last() == Some(&v) {
            *levels.last_mut().unwrap() = u;
        } else {
            levels.push(u);
            values.push(v);
        }
    }
    let quantile = QuantileFunction { levels, values };
    let measure = quantile.to_measure()?;
    Ok(Barycenter1d { quantile, measure })
}

/// `1/2 sum_k w_k W_2^2` between a one-dimensional candidate and the inputs.
pub fn barycenter_functional_1d(candidate: &QuantileFunction, measures: &[DiscreteMeasure], weights: &[f64]) -> Result<f64> {
    let mut total = 0.0;
    for (m, w) in measures.iter().zip(weights) {
        total += 0.5 * w * quantile_cost(candidate, &QuantileFunction::from_measure(m)?, 2.0);
    }
    Ok(total)
}

#[derive(Debug, Clone)]
pub struct FreeSupportBarycenter {
    pub measure: DiscreteMeasure,
    /// `F(b) = 1/2 sum_k w_k W_2^2(b, mu_k)` at every iterate, starting at the initialization.
    pub functional: Vec<f64>,
    pub iterations: usize,
    /// Largest support displacement of the last update.
    pub movement: f64,
    pub converged: bool,
}

impl FreeSupportBarycenter {
    pub fn ensure_converged(self) -> Result<Self> {
        if self.converged {
            Ok(self)
        } else {
            Err(Error::NoConvergence {
                iterations: self.iterations,
                residual: self.movement,
            })
        }
    }

    pub fn to_json(&self) -> Value {
        json!({
            "points": self.measure.to_points(),
            "weights": self.measure.weights(),
            "functional": self.functional,
            "iterations": self.iterations,
            "movement": self.movement,
            "converged": self.converged,
        })
    }
}

/// Image of every source atom under the barycentric projection of `plan`:
/// `x_i -> sum_j P_ij y_j / a_i`. Equals the map when the plan is one.
pub fn barycentric_projection(plan: &TransportPlan, target: &DiscreteMeasure) -> Vec<Vec<f64>> {
    let d = target.dim();
    (0..plan.matrix.nrows())
        .map(|i| {
            let a = plan.source_weights[i];
            let mut out = vec![0.0; d];
            for (j, y) in target.points().enumerate() {
                let m = plan.matrix[(i, j)];
                if m != 0.0 {
                    for k in 0..d {
                        out[k] += m * y[k];
                    }
                }
            }
            out.iter_mut().for_each(|v| *v /= a);
            out
        })
        .collect()
}

fn solve_all(solver: &ExactSolver, b: &DiscreteMeasure, measures: &[DiscreteMeasure]) -> Result<Vec<TransportPlan>> {
    measures.par_iter().map(|m| solver.solve(b, m, 2.0)).collect()
}

/// Fixed-point iteration `b <- (sum_k w_k T_k)_# b` with `T_k` the barycentric
/// projection of the optimal plan from `b` to `mu_k`. Support size and weights
/// stay those of `init`. Stops once no support point moves by `tol` or more;
/// when `max_iter` updates are spent, the best iterate is returned with
/// `converged = false`.
pub fn free_support_barycenter(
    measures: &[DiscreteMeasure],
    weights: &[f64],
    init: &DiscreteMeasure,
    max_iter: usize,
    tol: f64,
    solver: &ExactSolver,
) -> Result<FreeSupportBarycenter> {
    check_inputs(measures, weights)?;
    if init.dim() != measures[0].dim() {
        return Err(Error::DimensionMismatch {
            expected: measures[0].dim(),
            found: init.dim(),
        });
    }
    if !init.is_uniform() {
        return Err(Error::InvalidArgument("initial barycenter support must carry uniform weights".into()));
    }
    let d = init.dim();
    let mut b = init.clone();
    let mut functional = Vec::new();
    let mut best: Option<(f64, DiscreteMeasure)> = None;
    let mut movement = f64::INFINITY;
    let mut iterations = 0;
    loop {
        let plans = solve_all(solver, &b, measures)?;
        let f: f64 = plans.iter().zip(weights).map(|(p, w)| 0.5 * w * p.cost).sum();
        functional.push(f);
        if best.as_ref().is_none_or(|(bf, _)| f < *bf) {
            best = Some((f, b.clone()));
        }
        if movement < tol {
            return Ok(FreeSupportBarycenter {
                measure: b,
                functional,
                iterations,
                movement,
                converged: true,
            });
        }
        if iterations == max_iter {
            let (_, measure) = best.expect("at least one iterate");
            return Ok(FreeSupportBarycenter {
                measure,
                functional,
                iterations,
                movement,
                converged: false,
            });
        }
        let mut coords = vec![0.0; b.len() * d];
        for ((plan, m), w) in plans.iter().zip(measures).zip(weights) {
            for (i, t) in barycentric_projection(plan, m).into_iter().enumerate() {
                for k in 0..d {
                    coords[i * d + k] += w * t[k];
                }
            }
        }
        movement = b
            .points()
            .enumerate()
            .map(|(i, x)| {
                x.iter()
                    .enumerate()
                    .map(|(k, v)| (coords[i * d + k] - v).powi(2))
                    .sum::<f64>()
                    .sqrt()
            })
            .fold(0.0, f64::max);
        b = DiscreteMeasure::from_parts_unchecked(d, coords, b.weights().to_vec());
        iterations += 1;
    }
}

/// Both sides of the variance equality at a candidate barycenter `b` along a
/// probe `b'`, with `log_b(x) = T_{b -> x} - id`.
#[derive(Debug, Clone, PartialEq)]
pub struct VarianceReport {
    /// `W_2^2(b', b) sum_k w_k h(mu_k)`.
    pub lhs: f64,
    /// `sum_k w_k (W_2^2(mu_k, b') - W_2^2(mu_k, b))`.
    pub rhs: f64,
    pub gap: f64,
    /// `sum_k w_k h(mu_k)`; undefined when `b' = b`.
    pub hugging: Option<f64>,
    /// Hugging value for each input.
    pub per_input: Vec<f64>,
}

impl VarianceReport {
    pub fn to_json(&self) -> Value {
        json!({
            "lhs": self.lhs,
            "rhs": self.rhs,
            "gap": self.gap,
            "hugging": self.hugging,
            "per_input": self.per_input,
        })
    }
}

const MAP_MASS_TOL: f64 = 1e-12;

/// Images of the optimal map from `b`, or `None` if some atom is split.
fn optimal_map(plan: &TransportPlan, target: &DiscreteMeasure) -> Option<Vec<Vec<f64>>> {
    for i in 0..plan.matrix.nrows() {
        let row = plan.matrix.row(i);
        if row.iter().filter(|m| **m > MAP_MASS_TOL).count() != 1 {
            return None;
        }
    }
    Some(barycentric_projection(plan, target))
}

/// Evaluates the variance equality and the averaged hugging function
/// `h(x) = 1 - (||log_b x - log_b b'||_b^2 - W_2^2(x, b')) / W_2^2(b', b)`.
/// Fails with `NotAMap` (index `K` for the probe) when an optimal plan out of
/// `b` splits mass, since the log map is then undefined.
pub fn variance_equality_check(
    candidate: &DiscreteMeasure,
    measures: &[DiscreteMeasure],
    weights: &[f64],
    probe: &DiscreteMeasure,
    solver: &ExactSolver,
) -> Result<VarianceReport> {
    check_inputs(measures, weights)?;
    let k = measures.len();
    let plans = solve_all(solver, candidate, measures)?;
    let logs = plans
        .iter()
        .zip(measures)
        .enumerate()
        .map(|(idx, (p, m))| optimal_map(p, m).ok_or(Error::NotAMap { index: idx }))
        .collect::<Result<Vec<_>>>()?;
    let probe_plan = solver.solve(candidate, probe, 2.0)?;
    let probe_log = optimal_map(&probe_plan, probe).ok_or(Error::NotAMap { index: k })?;
    let to_probe: Vec<f64> = measures
        .par_iter()
        .map(|m| solver.cost(m, probe, 2.0))
        .collect::<Result<Vec<_>>>()?;
    let d2 = probe_plan.cost;

    let rhs: f64 = (0..k).map(|i| weights[i] * (to_probe[i] - plans[i].cost)).sum();
    let mut per_input = Vec::with_capacity(k);
    let mut tangent = Vec::with_capacity(k);
    for images in &logs {
        // ||T_k - T'||^2_b: the identity cancels in the difference of logs.
        let sq: f64 = images
            .iter()
            .zip(&probe_log)
            .zip(candidate.weights())
            .map(|((a, b), w)| w * a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>())
            .sum();
        tangent.push(sq);
    }
    let (lhs, hugging) = if d2 > 0.0 {
        for i in 0..k {
            per_input.push(1.0 - (tangent[i] - to_probe[i]) / d2);
        }
        let h: f64 = per_input.iter().zip(weights).map(|(h, w)| h * w).sum();
        (d2 * h, Some(h))
    } else {
        (0.0, None)
    };
    Ok(VarianceReport {
        lhs,
        rhs,
        gap: lhs - rhs,
        hugging,
        per_input,
    })
}
