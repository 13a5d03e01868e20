//! MMD, sliced Wasserstein and smoothed W1 between a sample and a shifted copy,
//! next to the exact W1.
//!
//! `cargo run --release --example surrogate_distances`

use otkit::exact::{wasserstein, ExactSolver};
use otkit::measures::{sample, GaussianMeasure, Measure, RngStream};
use otkit::surrogate::{mmd, sliced_wasserstein, smoothed_w1, Kernel, NoiseMode};

fn main() -> otkit::Result<()> {
    let law = Measure::Gaussian(GaussianMeasure::standard(3));
    let mu = sample(&law, 300, &RngStream::new(2, 0))?;
    for shift in [0.0, 0.25, 0.5, 1.0] {
        let nu = sample(&law, 300, &RngStream::new(2, 1))?.map_points(|x| vec![x[0] + shift, x[1], x[2]])?;
        let sliced = sliced_wasserstein(&mu, &nu, 1.0, 200, &RngStream::new(2, 2))?;
        let smoothed =
            smoothed_w1(&mu, &nu, 1.0, 2, &RngStream::new(2, 3), NoiseMode::Shared, &ExactSolver::default())?;
        println!(
            "shift {shift:<4}  W1 {:.4}  MMD {:.4}  SW1 {:.4} (se {:.4})  smoothed W1 {:.4}",
            wasserstein(&mu, &nu, 1.0)?,
            mmd(&mu, &nu, Kernel::Gaussian { sigma: 1.0 })?,
            sliced.value,
            sliced.se,
            smoothed
        );
    }
    Ok(())
}
