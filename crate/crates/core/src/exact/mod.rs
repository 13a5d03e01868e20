//! Exact discrete optimal transport: network simplex with dual certificates,
//! a permutation oracle, cyclical monotonicity and total variation.
//!
//! Optimal plans are generally not unique. Only the cost, feasibility and the
//! dual certificate are guaranteed; which optimal vertex is returned depends
//! on the pivot order.

mod oracle;
pub mod simplex;

use std::collections::HashMap;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::measures::{check_exponent, check_same_dim, pow_dist, DiscreteMeasure};
use crate::plan::TransportPlan;

pub use oracle::brute_force_ot;
pub use simplex::{solve_transport, PivotRule, SimplexSolution};

/// Default cap on `n * m`.
pub const DEFAULT_CAP: usize = 4_000_000;

/// Exact solver configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExactSolver {
    pub cap: usize,
    pub pivot: PivotRule,
}

impl Default for ExactSolver {
    fn default() -> Self {
        Self {
            cap: DEFAULT_CAP,
            pivot: PivotRule::default(),
        }
    }
}

impl ExactSolver {
    pub fn with_cap(cap: usize) -> Self {
        Self {
            cap,
            ..Self::default()
        }
    }

    fn costs(&self, mu: &DiscreteMeasure, nu: &DiscreteMeasure, p: f64) -> Result<Vec<f64>> {
        check_same_dim(mu, nu)?;
        check_exponent(p)?;
        let entries = mu.len() * nu.len();
        if entries > self.cap {
            return Err(Error::SizeCapExceeded { entries, cap: self.cap });
        }
        let mut costs = Vec::with_capacity(entries);
        for x in mu.points() {
            costs.extend(nu.points().map(|y| pow_dist(x, y, p)));
        }
        Ok(costs)
    }

    pub fn solve_costs(&self, a: &[f64], b: &[f64], costs: &[f64]) -> Result<SimplexSolution> {
        let entries = a.len() * b.len();
        if entries > self.cap {
            return Err(Error::SizeCapExceeded { entries, cap: self.cap });
        }
        solve_transport(a, b, costs, self.pivot)
    }

    /// Optimal plan for the cost `||x - y||^p`, with potentials normalized so
    /// that `g[0] = 0`.
    pub fn solve(&self, mu: &DiscreteMeasure, nu: &DiscreteMeasure, p: f64) -> Result<TransportPlan> {
        let costs = self.costs(mu, nu, p)?;
        let sol = solve_transport(mu.weights(), nu.weights(), &costs, self.pivot)?;
        let mut matrix = DMatrix::zeros(mu.len(), nu.len());
        for &(i, j, x) in &sol.flows {
            matrix[(i, j)] = x;
        }
        Ok(TransportPlan {
            matrix,
            source_weights: mu.weights().to_vec(),
            target_weights: nu.weights().to_vec(),
            cost: sol.cost,
            p,
            dual_f: Some(sol.f),
            dual_g: Some(sol.g),
        })
    }

    /// Optimal cost only; skips the dense plan.
    pub fn cost(&self, mu: &DiscreteMeasure, nu: &DiscreteMeasure, p: f64) -> Result<f64> {
        let costs = self.costs(mu, nu, p)?;
        Ok(solve_transport(mu.weights(), nu.weights(), &costs, self.pivot)?.cost)
    }

    pub fn wasserstein(&self, mu: &DiscreteMeasure, nu: &DiscreteMeasure, p: f64) -> Result<f64> {
        Ok(self.cost(mu, nu, p)?.max(0.0).powf(1.0 / p))
    }
}

pub fn solve_kantorovich(mu: &DiscreteMeasure, nu: &DiscreteMeasure, p: f64) -> Result<TransportPlan> {
    ExactSolver::default().solve(mu, nu, p)
}

/// `W_p(mu, nu)`, the `1/p`-th power of the optimal cost.
pub fn wasserstein(mu: &DiscreteMeasure, nu: &DiscreteMeasure, p: f64) -> Result<f64> {
    ExactSolver::default().wasserstein(mu, nu, p)
}

/// Outcome of a cyclical monotonicity check.
#[derive(Debug, Clone, PartialEq)]
pub struct MonotonicityReport {
    pub holds: bool,
    /// Support pairs `(i, j)` of the first cycle whose reassignment lowers the cost.
    pub violating_cycle: Option<Vec<(usize, usize)>>,
}

/// Checks that no cyclic reassignment of at most `max_cycle` support pairs
/// (mass above `1e-12`) lowers the cost `||x - y||^p` by more than `1e-9`,
/// where `p` is the exponent recorded in the plan.
pub fn check_cyclical_monotonicity(
    plan: &TransportPlan,
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    max_cycle: usize,
) -> MonotonicityReport {
    let support = plan.support(1e-12);
    let c = |i: usize, j: usize| pow_dist(mu.point(i), nu.point(j), plan.p);
    let mut cycle = Vec::with_capacity(max_cycle);
    let mut used = vec![false; support.len()];
    for start in 0..support.len() {
        cycle.clear();
        cycle.push(start);
        used[start] = true;
        if let Some(bad) = extend_cycle(&support, &c, start, max_cycle.min(support.len()), &mut cycle, &mut used) {
            return MonotonicityReport {
                holds: false,
                violating_cycle: Some(bad.iter().map(|&k| support[k]).collect()),
            };
        }
        used[start] = false;
    }
    MonotonicityReport {
        holds: true,
        violating_cycle: None,
    }
}

// Depth-first over ordered tuples whose first element is the smallest index,
// so each cycle is visited once per rotation class.
fn extend_cycle(
    support: &[(usize, usize)],
    c: &impl Fn(usize, usize) -> f64,
    start: usize,
    max_len: usize,
    cycle: &mut Vec<usize>,
    used: &mut [bool],
) -> Option<Vec<usize>> {
    if cycle.len() >= 2 {
        let k = cycle.len();
        let mut kept = 0.0;
        let mut shifted = 0.0;
        for t in 0..k {
            let (i, j) = support[cycle[t]];
            let (i_next, _) = support[cycle[(t + 1) % k]];
            kept += c(i, j);
            shifted += c(i_next, j);
        }
        if kept > shifted + 1e-9 {
            return Some(cycle.clone());
        }
    }
    if cycle.len() == max_len {
        return None;
    }
    for next in start + 1..support.len() {
        if used[next] {
            continue;
        }
        used[next] = true;
        cycle.push(next);
        let found = extend_cycle(support, c, start, max_len, cycle, used);
        cycle.pop();
        used[next] = false;
        if found.is_some() {
            return found;
        }
    }
    None
}

fn point_key(x: &[f64]) -> Vec<u64> {
    // +0.0 and -0.0 are the same point.
    x.iter().map(|v| (v + 0.0).to_bits()).collect()
}

/// `1/2 sum_z |mu(z) - nu(z)|` with atoms matched by exact coordinate equality.
pub fn tv_distance(mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> f64 {
    let mut diff: HashMap<Vec<u64>, f64> = HashMap::new();
    for (x, w) in mu.points().zip(mu.weights()) {
        *diff.entry(point_key(x)).or_default() += w;
    }
    for (y, w) in nu.points().zip(nu.weights()) {
        *diff.entry(point_key(y)).or_default() -= w;
    }
    let mut keys: Vec<_> = diff.keys().cloned().collect();
    keys.sort();
    let total: f64 = keys.iter().map(|k| diff[k].abs()).sum();
    (0.5 * total).clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(points: &[f64], weights: &[f64]) -> DiscreteMeasure {
        DiscreteMeasure::new(points.iter().map(|&x| vec![x]).collect(), weights.to_vec()).unwrap()
    }

    #[test]
    fn identity_coupling() {
        let mu = line(&[0.0, 1.0], &[0.5, 0.5]);
        let plan = solve_kantorovich(&mu, &mu, 2.0).unwrap();
        assert_eq!(plan.cost, 0.0);
        assert_eq!(plan.matrix, DMatrix::from_row_slice(2, 2, &[0.5, 0.0, 0.0, 0.5]));
    }

    #[test]
    fn unequal_two_point_masses() {
        let mu = line(&[0.0, 1.0], &[0.8, 0.2]);
        let nu = line(&[0.0, 1.0], &[0.5, 0.5]);
        let plan = solve_kantorovich(&mu, &nu, 2.0).unwrap();
        assert!((plan.cost - 0.3).abs() < 1e-12);
        let costs = crate::measures::cost_matrix(&mu, &nu, 2.0).unwrap();
        plan.verify(&costs, 1e-9).unwrap();
    }

    #[test]
    fn dirac_distance() {
        let a = DiscreteMeasure::dirac(vec![0.0, 0.0]).unwrap();
        let b = DiscreteMeasure::dirac(vec![3.0, 4.0]).unwrap();
        assert!((wasserstein(&a, &b, 1.0).unwrap() - 5.0).abs() < 1e-12);
        assert!((wasserstein(&a, &b, 2.0).unwrap() - 5.0).abs() < 1e-12);
    }

    #[test]
    fn size_cap() {
        let mu = line(&[0.0, 1.0, 2.0], &[1.0 / 3.0; 3]);
        let err = ExactSolver::with_cap(8).solve(&mu, &mu, 1.0).unwrap_err();
        assert!(matches!(err, Error::SizeCapExceeded { entries: 9, cap: 8 }));
    }

    #[test]
    fn anti_diagonal_plan_is_not_monotone() {
        let mu = line(&[0.0, 1.0], &[0.5, 0.5]);
        let plan = TransportPlan {
            matrix: DMatrix::from_row_slice(2, 2, &[0.0, 0.5, 0.5, 0.0]),
            source_weights: vec![0.5, 0.5],
            target_weights: vec![0.5, 0.5],
            cost: 1.0,
            p: 2.0,
            dual_f: None,
            dual_g: None,
        };
        let report = check_cyclical_monotonicity(&plan, &mu, &mu, 4);
        assert!(!report.holds);
        assert_eq!(report.violating_cycle, Some(vec![(0, 1), (1, 0)]));
    }

    #[test]
    fn single_pair_is_monotone() {
        let a = DiscreteMeasure::dirac(vec![0.0]).unwrap();
        let b = DiscreteMeasure::dirac(vec![5.0]).unwrap();
        let plan = solve_kantorovich(&a, &b, 2.0).unwrap();
        assert!(check_cyclical_monotonicity(&plan, &a, &b, 4).holds);
    }

    #[test]
    fn tv_examples() {
        let a = line(&[0.0], &[1.0]);
        let b = line(&[0.0, 1.0], &[0.5, 0.5]);
        let c = line(&[2.0, 3.0], &[0.5, 0.5]);
        assert_eq!(tv_distance(&b, &b), 0.0);
        assert_eq!(tv_distance(&a, &b), 0.5);
        assert_eq!(tv_distance(&b, &c), 1.0);
    }
}
