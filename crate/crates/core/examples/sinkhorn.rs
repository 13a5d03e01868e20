//! Entropic transport across a range of regularization strengths, compared
//! with the exact cost, plus the entropic map and the Sinkhorn divergence.
//!
//! `cargo run --release --example sinkhorn`

use otkit::entropic::{entropic_map, sinkhorn, sinkhorn_divergence, SinkhornParams};
use otkit::exact::solve_kantorovich;
use otkit::measures::{sample_unit_cube, RngStream};

fn main() -> otkit::Result<()> {
    let mu = sample_unit_cube(2, 40, &mut RngStream::new(5, 0).rng());
    let nu = sample_unit_cube(2, 30, &mut RngStream::new(5, 1).rng()).map_points(|x| vec![x[0] + 0.5, x[1]])?;
    let exact = solve_kantorovich(&mu, &nu, 2.0)?.cost;
    println!("exact W2^2 {exact:.6}");

    println!("{:>6} {:>10} {:>10} {:>10} {:>8}", "eps", "transport", "primal", "dual", "iters");
    for eps in [1.0, 0.3, 0.1, 0.03, 0.01] {
        let params = SinkhornParams { max_iter: 1_000_000, ..SinkhornParams::new(eps, 1e-7) };
        let r = sinkhorn(&mu, &nu, params)?.ensure_converged()?;
        println!(
            "{eps:>6} {:>10.6} {:>10.6} {:>10.6} {:>8}",
            r.transport_cost, r.primal_value, r.dual_value, r.iterations
        );
    }

    let r = sinkhorn(&mu, &nu, SinkhornParams::new(0.05, 1e-9))?;
    let images = entropic_map(&r, &mu, &nu);
    println!("entropic image of the first source point: {:?}", images[0]);
    println!("Sinkhorn divergence at eps 0.1: {:.6}", sinkhorn_divergence(&mu, &nu, SinkhornParams::new(0.1, 1e-9))?);
    Ok(())
}
