//! One-dimensional optimal transport through CDFs and quantile functions.

use crate::error::{Error, Result};
use crate::measures::{check_exponent, DiscreteMeasure};

// Slack when comparing cumulative masses accumulated from different inputs.
const MASS_SLACK: f64 = 1e-12;

/// Quantile function `F^dagger(u) = inf { t : F(t) >= u }` of a discrete law,
/// stored as breakpoints `(u_k, x_k)`: the value is `x_k` on `(u_{k-1}, u_k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantileFunction {
    pub levels: Vec<f64>,
    pub values: Vec<f64>,
}

impl QuantileFunction {
    pub fn from_measure(mu: &DiscreteMeasure) -> Result<Self> {
        require_1d(mu)?;
        Ok(Self::from_atoms(mu.coords(), mu.weights()))
    }

    /// Builds from unsorted atoms; equal values are merged.
    pub fn from_atoms(xs: &[f64], ws: &[f64]) -> Self {
        let mut idx: Vec<usize> = (0..xs.len()).collect();
        idx.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
        let mut levels = Vec::with_capacity(xs.len());
        let mut values: Vec<f64> = Vec::with_capacity(xs.len());
        let mut acc = 0.0;
        for k in idx {
            acc += ws[k];
            if values.last() == Some(&xs[k]) {
                *levels.last_mut().unwrap() = acc;
            } else if ws[k] > 0.0 {
                values.push(xs[k]);
                levels.push(acc);
            }
        }
        // The top level is 1 by definition; drop rounding in the running sum.
        *levels.last_mut().expect("measures have at least one atom") = 1.0;
        Self { levels, values }
    }

    pub fn eval(&self, u: f64) -> f64 {
        let k = self.levels.partition_point(|&l| l < u);
        self.values[k.min(self.values.len() - 1)]
    }

    /// Pushes the uniform law on the merged breakpoint grid forward: returns
    /// the atoms and their masses.
    pub fn to_measure(&self) -> Result<DiscreteMeasure> {
        let mut prev = 0.0;
        let mut pts = Vec::new();
        let mut ws = Vec::new();
        for (&u, &x) in self.levels.iter().zip(&self.values) {
            if u > prev {
                pts.push(vec![x]);
                ws.push(u - prev);
            }
            prev = u;
        }
        DiscreteMeasure::new(pts, ws)
    }
}

fn require_1d(mu: &DiscreteMeasure) -> Result<()> {
    if mu.dim() != 1 {
        return Err(Error::DimensionMismatch {
            expected: 1,
            found: mu.dim(),
        });
    }
    Ok(())
}

/// `int_0^1 |F_a^dagger - F_b^dagger|^p du`, evaluated exactly on the merged grid.
pub fn quantile_cost(a: &QuantileFunction, b: &QuantileFunction, p: f64) -> f64 {
    let (mut i, mut j) = (0, 0);
    let mut prev = 0.0;
    let mut total = 0.0;
    while i < a.levels.len() && j < b.levels.len() {
        let next = a.levels[i].min(b.levels[j]);
        let gap = (a.values[i] - b.values[j]).abs();
        let term = if p == 1.0 {
            gap
        } else if p == 2.0 {
            gap * gap
        } else {
            gap.powf(p)
        };
        total += (next - prev) * term;
        prev = next;
        if a.levels[i] == next {
            i += 1;
        }
        if b.levels[j] == next {
            j += 1;
        }
    }
    total
}

/// `W_p` between the atoms `(xs, wx)` and `(ys, wy)` on the line.
pub fn wp_atoms(xs: &[f64], wx: &[f64], ys: &[f64], wy: &[f64], p: f64) -> f64 {
    let a = QuantileFunction::from_atoms(xs, wx);
    let b = QuantileFunction::from_atoms(ys, wy);
    quantile_cost(&a, &b, p).powf(1.0 / p)
}

/// `W_p` through quantile functions.
pub fn wp_via_quantiles(mu: &DiscreteMeasure, nu: &DiscreteMeasure, p: f64) -> Result<f64> {
    check_exponent(p)?;
    let a = QuantileFunction::from_measure(mu)?;
    let b = QuantileFunction::from_measure(nu)?;
    Ok(quantile_cost(&a, &b, p).powf(1.0 / p))
}

/// `W_1 = int |F_mu - F_nu| dt` as a finite sum over the merged support.
pub fn w1_via_cdf(mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Result<f64> {
    require_1d(mu)?;
    require_1d(nu)?;
    let mut events: Vec<(f64, f64)> = mu
        .coords()
        .iter()
        .zip(mu.weights())
        .map(|(&x, &w)| (x, w))
        .chain(nu.coords().iter().zip(nu.weights()).map(|(&y, &w)| (y, -w)))
        .collect();
    events.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut diff = 0.0;
    let mut total = 0.0;
    for k in 0..events.len() {
        diff += events[k].1;
        if let Some(next) = events.get(k + 1) {
            total += diff.abs() * (next.0 - events[k].0);
        }
    }
    Ok(total)
}

/// Nondecreasing map `F_nu^dagger o F_mu` restricted to the atoms of `mu`.
#[derive(Debug, Clone, PartialEq)]
pub struct MonotoneMap {
    pub source: Vec<f64>,
    pub target: Vec<f64>,
}

impl MonotoneMap {
    /// Image of a support point of the source measure.
    pub fn apply(&self, x: f64) -> Option<f64> {
        let k = self.source.partition_point(|&s| s < x);
        (self.source.get(k) == Some(&x)).then(|| self.target[k])
    }

    pub fn pushforward(&self, mu: &DiscreteMeasure) -> Result<DiscreteMeasure> {
        let mut pts = Vec::with_capacity(mu.len());
        for &x in mu.coords() {
            let y = self
                .apply(x)
                .ok_or_else(|| Error::InvalidArgument(format!("{x} is not in the map's domain")))?;
            pts.push(vec![y]);
        }
        DiscreteMeasure::new(pts, mu.weights().to_vec())
    }
}

/// The monotone rearrangement from `mu` to `nu`. Fails with `AtomSplit` when
/// an atom of `mu` straddles a quantile breakpoint of `nu`, since the optimal
/// coupling then has to split that atom.
pub fn monotone_map(mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Result<MonotoneMap> {
    let a = QuantileFunction::from_measure(mu)?;
    let b = QuantileFunction::from_measure(nu)?;
    let mut target = Vec::with_capacity(a.values.len());
    let mut prev = 0.0;
    for (&u, &x) in a.levels.iter().zip(&a.values) {
        let j = b.levels.partition_point(|&l| l < u - MASS_SLACK).min(b.levels.len() - 1);
        let lower = if j == 0 { 0.0 } else { b.levels[j - 1] };
        if lower > prev + MASS_SLACK {
            return Err(Error::AtomSplit { atom: x });
        }
        target.push(b.values[j]);
        prev = u;
    }
    Ok(MonotoneMap {
        source: a.values,
        target,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn uniform(xs: &[f64]) -> DiscreteMeasure {
        DiscreteMeasure::uniform(xs.iter().map(|&x| vec![x]).collect()).unwrap()
    }

    #[test]
    fn cdf_examples() {
        assert_eq!(w1_via_cdf(&uniform(&[0.0]), &uniform(&[1.0])).unwrap(), 1.0);
        let mu = uniform(&[0.0, 1.0]);
        assert_eq!(w1_via_cdf(&mu, &mu).unwrap(), 0.0);
        assert_eq!(w1_via_cdf(&mu, &uniform(&[0.5, 2.0])).unwrap(), 0.75);
    }

    #[test]
    fn quantile_examples() {
        assert_eq!(wp_via_quantiles(&uniform(&[0.0]), &uniform(&[1.0]), 2.0).unwrap(), 1.0);
        let v = wp_via_quantiles(&uniform(&[0.0, 1.0]), &uniform(&[0.5, 2.0]), 2.0).unwrap();
        assert!((v - 0.625f64.sqrt()).abs() < 1e-15);
        let xs = [-0.3, 1.2, 0.4, 2.5];
        let c = 0.75;
        let shifted: Vec<f64> = xs.iter().map(|x| x + c).collect();
        for p in [1.0, 2.0, 3.0] {
            let w = wp_via_quantiles(&uniform(&xs), &uniform(&shifted), p).unwrap();
            assert!((w - c).abs() < 1e-12);
        }
    }

    #[test]
    fn eval_is_left_continuous() {
        let q = QuantileFunction::from_measure(&uniform(&[0.0, 1.0])).unwrap();
        assert_eq!(q.eval(0.0), 0.0);
        assert_eq!(q.eval(0.5), 0.0);
        assert_eq!(q.eval(0.5000001), 1.0);
        assert_eq!(q.eval(1.0), 1.0);
    }

    #[test]
    fn map_examples() {
        let m = monotone_map(&uniform(&[1.0, 2.0]), &uniform(&[3.0, 4.0])).unwrap();
        assert_eq!((m.apply(1.0), m.apply(2.0)), (Some(3.0), Some(4.0)));
        let m = monotone_map(&uniform(&[1.0, 0.0]), &uniform(&[2.0, 0.5])).unwrap();
        assert_eq!(m.source, vec![0.0, 1.0]);
        assert_eq!(m.target, vec![0.5, 2.0]);
        let err = monotone_map(&uniform(&[0.0]), &uniform(&[-1.0, 1.0])).unwrap_err();
        assert!(matches!(err, Error::AtomSplit { atom } if atom == 0.0));
    }

    #[test]
    fn many_to_one_is_a_map() {
        let m = monotone_map(&uniform(&[0.0, 1.0, 2.0, 3.0]), &uniform(&[5.0, 6.0])).unwrap();
        assert_eq!(m.target, vec![5.0, 5.0, 6.0, 6.0]);
        let pushed = m.pushforward(&uniform(&[0.0, 1.0, 2.0, 3.0])).unwrap();
        assert_eq!(w1_via_cdf(&pushed, &uniform(&[5.0, 6.0])).unwrap(), 0.0);
    }

    #[test]
    fn rejects_higher_dimension() {
        let mu = DiscreteMeasure::dirac(vec![0.0, 1.0]).unwrap();
        assert!(matches!(w1_via_cdf(&mu, &mu), Err(Error::DimensionMismatch { .. })));
    }
}
