//! Closed-form transport between Gaussians: distance, Brenier map, the affine
//! map estimated from samples, and a barycenter.
//!
//! `cargo run --release --example gaussian_transport`

use otkit::exact::ExactSolver;
use otkit::gaussian::{estimate_affine_map, gaussian_barycenter, gaussian_brenier_map, gaussian_w2};
use otkit::measures::{sample, GaussianMeasure, Measure, RngStream};

fn main() -> otkit::Result<()> {
    let a = GaussianMeasure::from_slices(&[0.0, 0.0], &[&[1.0, 0.3], &[0.3, 0.5]])?;
    let b = GaussianMeasure::from_slices(&[2.0, -1.0], &[&[2.0, -0.4], &[-0.4, 1.0]])?;

    let closed = gaussian_w2(&a, &b)?;
    let xa = sample(&Measure::Gaussian(a.clone()), 2000, &RngStream::new(3, 0))?;
    let xb = sample(&Measure::Gaussian(b.clone()), 2000, &RngStream::new(3, 1))?;
    let empirical = ExactSolver::default().wasserstein(&xa, &xb, 2.0)?;
    println!("W2 closed form {closed:.4}, between 2000-point samples {empirical:.4}");

    let map = gaussian_brenier_map(&a, &b)?;
    println!("Brenier map A ={}c = {}", map.a, map.c.transpose());

    let est = estimate_affine_map(&xb)?;
    println!("affine estimate from samples of b: A ={}", est.map.a);

    let bary = gaussian_barycenter(&[a, b], &[0.5, 0.5])?;
    println!(
        "barycenter after {} iterations (residual {:.1e}): mean {} cov{}",
        bary.iterations,
        bary.residual,
        bary.measure.mean().transpose(),
        bary.measure.cov()
    );
    Ok(())
}
