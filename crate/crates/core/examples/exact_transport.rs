//! Exact transport between two small point clouds in the plane, with the
//! optimal plan, its dual certificate and a cyclical monotonicity check.
//!
//! `cargo run --example exact_transport`

use otkit::exact::{check_cyclical_monotonicity, solve_kantorovich, tv_distance};
use otkit::DiscreteMeasure;

fn main() -> otkit::Result<()> {
    let mu = DiscreteMeasure::new(
        vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 1.0]],
        vec![0.1, 0.4, 0.3, 0.2],
    )?;
    let nu = DiscreteMeasure::new(vec![vec![0.5, 0.2], vec![2.0, 1.0], vec![0.2, 1.5]], vec![0.5, 0.3, 0.2])?;

    for p in [1.0, 2.0] {
        let plan = solve_kantorovich(&mu, &nu, p)?;
        println!("p = {p}: cost {:.6}, W_p {:.6}", plan.cost, plan.cost.powf(1.0 / p));
        if p == 2.0 {
            println!("plan:{}", plan.matrix);
            if let (Some(f), Some(g)) = (&plan.dual_f, &plan.dual_g) {
                let dual: f64 = f.iter().zip(mu.weights()).chain(g.iter().zip(nu.weights())).map(|(a, b)| a * b).sum();
                println!("dual value {dual:.6}, marginal residual {:.1e}", plan.marginal_residual());
            }
            let report = check_cyclical_monotonicity(&plan, &mu, &nu, 3);
            println!("cyclically monotone: {}", report.holds);
        }
    }
    println!("total variation {:.3}", tv_distance(&mu, &nu));
    Ok(())
}
