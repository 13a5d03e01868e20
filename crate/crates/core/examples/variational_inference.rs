//! Gaussian variational inference as a Bures-Wasserstein gradient flow, and a
//! two-component Gaussian mixture fitted to a bimodal target.
//!
//! `cargo run --release --example variational_inference`

use otkit::flows::{bw_vi_flow, gaussian_mixture_flow, Expectation, GaussianParticleEnsemble, MixtureWeights, Potential};
use otkit::GaussianMeasure;

fn main() -> otkit::Result<()> {
    let quad = Expectation::Quadrature { order: 20 };

    let run = bw_vi_flow(&Potential::quartic(), &GaussianMeasure::from_slices(&[1.0], &[&[3.0]])?, 0.01, 10.0, &quad)?;
    for k in (0..run.states.len()).step_by(200) {
        let s = &run.states[k];
        println!("t = {:>4.1}  m = {:+.5}  s^2 = {:.6}  KL + log Z = {:.6}", run.times[k], s.mean()[0], s.cov()[(0, 0)], run.kl[k]);
    }
    println!("stationary variance for x^4/4: 1/sqrt(3) = {:.6}", 1.0 / 3f64.sqrt());

    let init = GaussianParticleEnsemble::new(
        vec![
            GaussianMeasure::from_slices(&[-0.5, 0.2], &[&[1.0, 0.0], &[0.0, 1.0]])?,
            GaussianMeasure::from_slices(&[0.8, -0.1], &[&[0.5, 0.0], &[0.0, 0.5]])?,
        ],
        vec![0.3, 0.7],
    )?;
    let run = gaussian_mixture_flow(&Potential::bimodal(2.5), &init, 0.01, 15.0, &quad, MixtureWeights::Wfr)?;
    let last = run.states.last().unwrap();
    for (c, w) in last.components.iter().zip(&last.weights) {
        println!("component weight {w:.3} mean {} cov{}", c.mean().transpose(), c.cov());
    }
    Ok(())
}
