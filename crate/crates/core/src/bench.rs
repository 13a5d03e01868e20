//! Empirical convergence-rate experiments: the distance between two
//! independent `n`-samples of the same law, fitted as `log E[value]` against
//! `log n`.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::exact::ExactSolver;
use crate::json::{fmt_g17, write_file};
use crate::measures::{sample, sample_unit_ball, sample_unit_cube, DiscreteMeasure, GaussianMeasure, Measure, RngStream};
use crate::surrogate::{mmd, sliced_wasserstein, smoothed_w1, Kernel, NoiseMode};

/// Cap on `n * m` for the rate experiments (4096 x 4096 fits).
pub const BENCH_CAP: usize = 1 << 25;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RateStatistic {
    W1Empirical,
    Mmd { sigma: f64 },
    SlicedW1 { directions: usize },
    SmoothedW1 { sigma: f64, n_noise: usize },
}

impl RateStatistic {
    pub fn name(&self) -> &'static str {
        match self {
            RateStatistic::W1Empirical => "w1_empirical",
            RateStatistic::Mmd { .. } => "mmd",
            RateStatistic::SlicedW1 { .. } => "sliced_w1",
            RateStatistic::SmoothedW1 { .. } => "smoothed_w1",
        }
    }

    /// Cost entries of the exact solve at sample size `n`, if one is needed.
    fn solver_entries(&self, n: usize) -> Option<usize> {
        match self {
            RateStatistic::W1Empirical => Some(n * n),
            RateStatistic::SmoothedW1 { n_noise, .. } => Some((n * n_noise).pow(2)),
            _ => None,
        }
    }

    fn evaluate(&self, a: &DiscreteMeasure, b: &DiscreteMeasure, stream: &RngStream, solver: &ExactSolver) -> Result<f64> {
        match *self {
            RateStatistic::W1Empirical => solver.wasserstein(a, b, 1.0),
            RateStatistic::Mmd { sigma } => mmd(a, b, Kernel::Gaussian { sigma }),
            RateStatistic::SlicedW1 { directions } => Ok(sliced_wasserstein(a, b, 1.0, directions, stream)?.value),
            RateStatistic::SmoothedW1 { sigma, n_noise } => {
                smoothed_w1(a, b, sigma, n_noise, stream, NoiseMode::Independent, solver)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Sampler {
    Gaussian(GaussianMeasure),
    UnitCube(usize),
    UnitBall(usize),
}

impl Sampler {
    pub fn dim(&self) -> usize {
        match self {
            Sampler::Gaussian(g) => g.dim(),
            Sampler::UnitCube(d) | Sampler::UnitBall(d) => *d,
        }
    }

    pub fn describe(&self) -> String {
        match self {
            Sampler::Gaussian(g) => format!("gaussian(d={})", g.dim()),
            Sampler::UnitCube(d) => format!("uniform-cube(d={d})"),
            Sampler::UnitBall(d) => format!("uniform-ball(d={d})"),
        }
    }

    pub fn draw(&self, n: usize, stream: &RngStream) -> Result<DiscreteMeasure> {
        match self {
            Sampler::Gaussian(g) => sample(&Measure::Gaussian(g.clone()), n, stream),
            Sampler::UnitCube(d) => Ok(sample_unit_cube(*d, n, &mut stream.rng())),
            Sampler::UnitBall(d) => Ok(sample_unit_ball(*d, n, &mut stream.rng())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateRecord {
    pub n: usize,
    pub replicate: usize,
    pub value: f64,
}

/// Raw records with the least-squares fit of `log mean(value)` on `log n`.
#[derive(Debug, Clone, PartialEq)]
pub struct RateTable {
    pub statistic: String,
    pub sampler: String,
    pub seed: u64,
    pub records: Vec<RateRecord>,
    pub n_grid: Vec<usize>,
    pub replicates: usize,
    pub slope: f64,
    pub intercept: f64,
    /// Standard error of the slope; zero with only two grid points.
    pub slope_se: f64,
}

impl RateTable {
    /// Validates the records and fits the slope.
    pub fn from_records(statistic: &str, sampler: &str, seed: u64, records: Vec<RateRecord>) -> Result<Self> {
        if records.is_empty() {
            return Err(Error::Invariant("rate table has no records".into()));
        }
        let mut n_grid: Vec<usize> = Vec::new();
        let mut counts: Vec<usize> = Vec::new();
        for r in &records {
            match n_grid.last() {
                Some(&last) if last == r.n => *counts.last_mut().unwrap() += 1,
                Some(&last) if last > r.n => {
                    return Err(Error::Invariant("records must be grouped by increasing n".into()));
                }
                _ => {
                    if n_grid.contains(&r.n) {
                        return Err(Error::Invariant("records must be grouped by increasing n".into()));
                    }
                    n_grid.push(r.n);
                    counts.push(1);
                }
            }
        }
        if n_grid.len() < 2 {
            return Err(Error::Invariant("need at least two distinct sample sizes".into()));
        }
        if counts.iter().any(|c| *c != counts[0]) {
            return Err(Error::Invariant("replicate count differs across sample sizes".into()));
        }
        let replicates = counts[0];
        let xs: Vec<f64> = n_grid.iter().map(|n| (*n as f64).ln()).collect();
        let ys: Vec<f64> = records
            .chunks(replicates)
            .map(|c| (c.iter().map(|r| r.value).sum::<f64>() / replicates as f64).ln())
            .collect();
        if ys.iter().any(|y| !y.is_finite()) {
            return Err(Error::Invariant("mean statistic must be positive to take logs".into()));
        }
        let (slope, intercept, slope_se) = ols(&xs, &ys);
        Ok(Self {
            statistic: statistic.to_string(),
            sampler: sampler.to_string(),
            seed,
            records,
            n_grid,
            replicates,
            slope,
            intercept,
            slope_se,
        })
    }

    pub fn csv(&self) -> String {
        let mut out = String::from("statistic,n,replicate,value\n");
        for r in &self.records {
            let _ = writeln!(out, "{},{},{},{}", self.statistic, r.n, r.replicate, fmt_g17(r.value));
        }
        out
    }

    pub fn summary(&self) -> Value {
        json!({
            "statistic": self.statistic,
            "sampler": self.sampler,
            "slope": self.slope,
            "intercept": self.intercept,
            "se": self.slope_se,
            "n_grid": self.n_grid,
            "replicates": self.replicates,
            "seed": self.seed,
        })
    }
}

/// Ordinary least squares `y = a + b x`; returns `(b, a, se(b))`.
fn ols(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let k = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / k;
    let my = ys.iter().sum::<f64>() / k;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let se = if xs.len() > 2 {
        let ssr: f64 = xs.iter().zip(ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
        (ssr / (k - 2.0) / sxx).sqrt()
    } else {
        0.0
    };
    (slope, intercept, se)
}

/// For every `n` and replicate, draws two independent `n`-samples and records
/// the statistic between them. Replicate `r` at grid index `g` uses the stream
/// `RngStream::new(seed, 0).derive(g).derive(r)`, so results do not depend on
/// scheduling.
pub fn rate_experiment(
    statistic: RateStatistic,
    sampler: &Sampler,
    n_grid: &[usize],
    replicates: usize,
    seed: u64,
) -> Result<RateTable> {
    if replicates == 0 {
        return Err(Error::Invariant("rate experiment needs at least one replicate".into()));
    }
    if n_grid.windows(2).any(|w| w[0] >= w[1]) || n_grid.first().is_some_and(|n| *n == 0) {
        return Err(Error::Invariant("sample sizes must be positive and strictly increasing".into()));
    }
    let solver = ExactSolver::with_cap(BENCH_CAP);
    if let Some(entries) = n_grid.last().and_then(|&n| statistic.solver_entries(n)) {
        if entries > solver.cap {
            return Err(Error::SizeCapExceeded { entries, cap: solver.cap });
        }
    }
    let base = RngStream::new(seed, 0);
    let mut records = Vec::with_capacity(n_grid.len() * replicates);
    for (g, &n) in n_grid.iter().enumerate() {
        let level = base.derive(g as u64);
        let values = (0..replicates)
            .into_par_iter()
            .map(|r| {
                let s = level.derive(r as u64);
                let a = sampler.draw(n, &s.derive(0))?;
                let b = sampler.draw(n, &s.derive(1))?;
                statistic.evaluate(&a, &b, &s.derive(2), &solver)
            })
            .collect::<Result<Vec<f64>>>()?;
        records.extend(values.into_iter().enumerate().map(|(replicate, value)| RateRecord { n, replicate, value }));
    }
    RateTable::from_records(statistic.name(), &sampler.describe(), seed, records)
}

/// Writes the raw records to `path` (CSV) and the fit summary next to it with
/// a `.json` extension. Returns the summary path.
pub fn emit_report(table: &RateTable, path: &Path) -> Result<PathBuf> {
    // Revalidate in case the table was assembled by hand.
    RateTable::from_records(&table.statistic, &table.sampler, table.seed, table.records.clone())?;
    std::fs::write(path, table.csv())?;
    let summary = path.with_extension("json");
    write_file(&summary, &table.summary())?;
    Ok(summary)
}

/// Reads a report written by [`emit_report`] and refits it.
pub fn load_report(csv_path: &Path) -> Result<RateTable> {
    let summary: Value = serde_json::from_str(&std::fs::read_to_string(csv_path.with_extension("json"))?)?;
    let text = std::fs::read_to_string(csv_path)?;
    let bad = |line: &str| Error::Parse(format!("bad rate record: {line}"));
    let mut statistic = String::new();
    let mut records = Vec::new();
    for line in text.lines().skip(1) {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 4 {
            return Err(bad(line));
        }
        statistic = fields[0].to_string();
        records.push(RateRecord {
            n: fields[1].parse().map_err(|_| bad(line))?,
            replicate: fields[2].parse().map_err(|_| bad(line))?,
            value: fields[3].parse().map_err(|_| bad(line))?,
        });
    }
    let sampler = summary["sampler"].as_str().unwrap_or_default();
    let seed = summary["seed"].as_u64().ok_or_else(|| Error::Parse("summary lacks a seed".into()))?;
    RateTable::from_records(&statistic, sampler, seed, records)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ols_recovers_a_line() {
        let xs = [0.0, 1.0, 2.0, 3.0];
        let ys: Vec<f64> = xs.iter().map(|x| 2.0 - 0.5 * x).collect();
        let (b, a, se) = ols(&xs, &ys);
        assert!((b + 0.5).abs() < 1e-15 && (a - 2.0).abs() < 1e-15 && se < 1e-15);
    }

    #[test]
    fn table_validation() {
        assert!(matches!(RateTable::from_records("x", "s", 1, vec![]), Err(Error::Invariant(_))));
        let rec = |n, replicate| RateRecord { n, replicate, value: 1.0 / n as f64 };
        let one_size = vec![rec(4, 0), rec(4, 1)];
        assert!(RateTable::from_records("x", "s", 1, one_size).is_err());
        let ragged = vec![rec(4, 0), rec(4, 1), rec(8, 0)];
        assert!(RateTable::from_records("x", "s", 1, ragged).is_err());
        let t = RateTable::from_records("x", "s", 1, vec![rec(4, 0), rec(8, 0), rec(16, 0)]).unwrap();
        assert!((t.slope + 1.0).abs() < 1e-12);
    }

    #[test]
    fn experiment_is_seeded() {
        let run = || rate_experiment(RateStatistic::W1Empirical, &Sampler::UnitCube(2), &[4, 8, 16], 3, 7).unwrap();
        assert_eq!(run(), run());
    }
}
