//! Tokens on the circle under self-attention dynamics collapse to a single
//! cluster; prints the diameter of the token set over time for several
//! inverse temperatures.
//!
//! `cargo run --release --example attention_clustering`

use nalgebra::DMatrix;
use otkit::flows::{attention_flow, AttentionVariant, ParticleEnsemble};

fn diameter(e: &ParticleEnsemble) -> f64 {
    let mut worst: f64 = 0.0;
    for a in &e.positions {
        for b in &e.positions {
            worst = worst.max(((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt());
        }
    }
    worst
}

fn main() -> otkit::Result<()> {
    let tokens: Vec<Vec<f64>> = (0..8)
        .map(|k| {
            let t = 0.4 + 0.6 * k as f64;
            vec![t.cos(), t.sin()]
        })
        .collect();
    let tokens = ParticleEnsemble::uniform(tokens)?;
    let id = DMatrix::identity(2, 2);

    for beta in [0.5, 1.0, 4.0] {
        let q = &id * beta;
        let traj = attention_flow(&tokens, &q, &id, &id, 0.01, 20.0, AttentionVariant::Sphere)?;
        let samples: Vec<String> = traj.iter().step_by(100).map(|e| format!("{:.4}", diameter(e))).collect();
        println!("beta {beta}: diameter at t = 0, 1, 2, ...: {}", samples.join(" "));
    }
    Ok(())
}
