//! Fits empirical convergence rates for W1, MMD, sliced and smoothed W1.
//!
//! `cargo run --release --example convergence_rates [max_n] [reps]`

use std::time::Instant;

use otkit::bench::{rate_experiment, RateStatistic, Sampler};
use otkit::GaussianMeasure;

fn main() -> otkit::Result<()> {
    let args: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let max_n = args.first().copied().unwrap_or(1024);
    let reps = args.get(1).copied().unwrap_or(10);
    let grid: Vec<usize> = std::iter::successors(Some(64), |n| Some(n * 2)).take_while(|n| *n <= max_n).collect();
    let runs = [
        (RateStatistic::W1Empirical, Sampler::UnitCube(3), "n^(-1/3)"),
        (RateStatistic::Mmd { sigma: 1.0 }, Sampler::Gaussian(GaussianMeasure::standard(5)), "n^(-1/2)"),
        (RateStatistic::SlicedW1 { directions: 200 }, Sampler::UnitBall(5), "n^(-1/2)"),
        (RateStatistic::SmoothedW1 { sigma: 1.0, n_noise: 1 }, Sampler::Gaussian(GaussianMeasure::standard(5)), "n^(-1/2)"),
    ];
    for (stat, sampler, theory) in runs {
        let start = Instant::now();
        let table = rate_experiment(stat, &sampler, &grid, reps, 1)?;
        println!(
            "{:<13} {:<22} slope {:+.3} (se {:.3}, theory {theory})  {:.1}s",
            table.statistic,
            table.sampler,
            table.slope,
            table.slope_se,
            start.elapsed().as_secs_f64()
        );
    }
    Ok(())
}
