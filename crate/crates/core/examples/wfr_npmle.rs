//! Fitting a Gaussian location mixture by maximum likelihood with the
//! Wasserstein-Fisher-Rao particle flow, against the position-only flow.
//!
//! `cargo run --release --example wfr_npmle`

use otkit::flows::{npmle_flow, NpmleMode};
use otkit::measures::RngStream;
use otkit::DiscreteMeasure;
use rand::Rng;
use rand_distr::StandardNormal;

fn main() -> otkit::Result<()> {
    // 70% of the data around -2, 30% around 3.
    let mut rng = RngStream::new(6, 0).rng();
    let data: Vec<Vec<f64>> = (0..300)
        .map(|_| {
            let center = if rng.random::<f64>() < 0.7 { -2.0 } else { 3.0 };
            vec![center + rng.sample::<f64, _>(StandardNormal)]
        })
        .collect();
    let data = DiscreteMeasure::uniform(data)?;

    for mode in [NpmleMode::Wfr, NpmleMode::Wgf] {
        let run = npmle_flow(&data, 20, 0.02, 20.0, &RngStream::new(6, 1), mode)?;
        let last = run.trajectory.last().unwrap();
        let left: f64 = last.positions.iter().zip(&last.weights).filter(|(x, _)| x[0] < 0.5).map(|(_, w)| w).sum();
        println!(
            "{mode:?}: negative log-likelihood {:.4} -> {:.4}, mass left of 0.5: {left:.3}",
            run.log_likelihood[0],
            run.log_likelihood.last().unwrap()
        );
        let mut atoms: Vec<(f64, f64)> = last.positions.iter().map(|x| x[0]).zip(last.weights.iter().copied()).collect();
        atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
        let heavy: Vec<String> =
            atoms.iter().filter(|a| a.1 > 0.02).map(|(x, w)| format!("{x:.2}:{w:.2}")).collect();
        println!("  atoms with weight > 0.02: {}", heavy.join(" "));
    }
    Ok(())
}
