//! Transport on the line: quantile and CDF formulas against the exact solver,
//! and the monotone map between two sorted samples.
//!
//! `cargo run --example one_dimensional`

use otkit::exact::wasserstein;
use otkit::measures::{sample, GaussianMeasure, Measure, RngStream};
use otkit::univariate::{monotone_map, w1_via_cdf, wp_via_quantiles};
use otkit::DiscreteMeasure;

fn main() -> otkit::Result<()> {
    let mu = sample(&Measure::Gaussian(GaussianMeasure::standard(1)), 300, &RngStream::new(1, 0))?;
    let nu = mu.map_points(|x| vec![2.0 * x[0] + 1.0])?;

    for p in [1.0, 2.0, 3.0] {
        println!(
            "W_{p}: quantiles {:.9}, exact {:.9}",
            wp_via_quantiles(&mu, &nu, p)?,
            wasserstein(&mu, &nu, p)?
        );
    }
    println!("W_1 by CDF integral {:.9}", w1_via_cdf(&mu, &nu)?);

    let a = DiscreteMeasure::uniform(vec![vec![3.0], vec![-1.0], vec![0.5]])?;
    let b = DiscreteMeasure::uniform(vec![vec![10.0], vec![12.0], vec![11.0]])?;
    let map = monotone_map(&a, &b)?;
    for (x, y) in map.source.iter().zip(&map.target) {
        println!("{x:>5} -> {y}");
    }
    Ok(())
}
