//! Sampling a bimodal target with unadjusted Langevin and with SVGD, starting
//! from the same cloud near the origin.
//!
//! `cargo run --release --example langevin_and_svgd [out.csv]`

use otkit::flows::{langevin_step, svgd_step, trajectory_csv, ParticleEnsemble, Potential};
use otkit::measures::RngStream;
use otkit::surrogate::Kernel;
use rand::Rng;

fn summary(name: &str, e: &ParticleEnsemble) {
    let right = e.positions.iter().filter(|x| x[0] > 0.0).count();
    let mean_abs: f64 = e.positions.iter().map(|x| x[0].abs()).sum::<f64>() / e.len() as f64;
    println!("{name:<9} t = {:<5.1} right mode {right}/{}  mean |x0| {mean_abs:.3}", e.time, e.len());
}

fn main() -> otkit::Result<()> {
    let target = Potential::bimodal(2.0);
    let mut rng = RngStream::new(4, 0).rng();
    let start: Vec<Vec<f64>> = (0..100).map(|_| vec![rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5)]).collect();

    let mut langevin = ParticleEnsemble::uniform(start.clone())?;
    let mut noise = RngStream::new(4, 1).rng();
    let mut svgd = ParticleEnsemble::uniform(start)?;
    let mut frames = vec![svgd.clone()];
    for step in 1..=2000 {
        langevin = langevin_step(&langevin, &target, 0.01, &mut noise)?;
        svgd = svgd_step(&svgd, &target, Kernel::Gaussian { sigma: 0.5 }, 0.01)?;
        if step % 500 == 0 {
            summary("langevin", &langevin);
            summary("svgd", &svgd);
            frames.push(svgd.clone());
        }
    }
    if let Some(path) = std::env::args().nth(1) {
        std::fs::write(&path, trajectory_csv(&frames))?;
        println!("SVGD frames written to {path}");
    }
    Ok(())
}
