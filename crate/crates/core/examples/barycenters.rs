//! Wasserstein barycenters three ways: quantile averaging on the line, the
//! free-support fixed point in the plane, and the Gaussian fixed point, with a
//! variance-equality probe at the computed barycenter.
//!
//! `cargo run --release --example barycenters`

use otkit::barycenter::{barycenter_1d, free_support_barycenter, variance_equality_check};
use otkit::exact::ExactSolver;
use otkit::gaussian::gaussian_barycenter;
use otkit::measures::{sample, GaussianMeasure, Measure, RngStream};
use otkit::DiscreteMeasure;

fn main() -> otkit::Result<()> {
    let line = |xs: &[f64]| DiscreteMeasure::uniform(xs.iter().map(|x| vec![*x]).collect());
    let b = barycenter_1d(&[line(&[0.0, 1.0, 5.0])?, line(&[10.0, 11.0])?], &[0.5, 0.5])?;
    println!("1D barycenter atoms {:?} weights {:?}", b.measure.to_points(), b.measure.weights());

    let laws = [
        GaussianMeasure::from_slices(&[0.0, 0.0], &[&[1.0, 0.5], &[0.5, 1.0]])?,
        GaussianMeasure::from_slices(&[4.0, 0.0], &[&[1.0, -0.5], &[-0.5, 1.0]])?,
    ];
    let w = [0.5, 0.5];
    let inputs: Vec<DiscreteMeasure> = laws
        .iter()
        .enumerate()
        .map(|(k, g)| sample(&Measure::Gaussian(g.clone()), 200, &RngStream::new(7, k as u64)))
        .collect::<otkit::Result<_>>()?;
    let solver = ExactSolver::default();
    let init = DiscreteMeasure::uniform(inputs[0].to_points())?;
    let run = free_support_barycenter(&inputs, &w, &init, 50, 1e-9, &solver)?;
    println!("free support: {} iterations, converged {}, F trace {:?}", run.iterations, run.converged, run.functional);
    println!("sample mean {} covariance{}", run.measure.mean().transpose(), run.measure.covariance());

    let g = gaussian_barycenter(&laws, &w)?;
    println!("Gaussian barycenter mean {} covariance{}", g.measure.mean().transpose(), g.measure.cov());

    let probe = sample(&Measure::Gaussian(GaussianMeasure::standard(2)), 200, &RngStream::new(7, 9))?;
    let report = variance_equality_check(&run.measure, &inputs, &w, &probe, &solver)?;
    println!("variance equality gap {:.2e}, averaged hugging {:?}", report.gap, report.hugging);
    Ok(())
}
