//! Certified bounds around the exact W1 in the unit square: the dyadic and
//! Fourier upper bounds and the Lipschitz-witness lower bound.
//!
//! `cargo run --release --example w1_bounds`

use otkit::bounds::{dyadic_upper_bound, fourier_coefficients, fourier_upper_bound_grid, lipschitz_lower_bound, Reference};
use otkit::exact::wasserstein;
use otkit::measures::{sample_unit_cube, RngStream};
use otkit::Measure;

fn main() -> otkit::Result<()> {
    let mu = sample_unit_cube(2, 60, &mut RngStream::new(8, 0).rng());
    let nu = sample_unit_cube(2, 60, &mut RngStream::new(8, 1).rng()).map_points(|x| vec![x[0] * x[0], x[1]])?;

    let w1 = wasserstein(&mu, &nu, 1.0)?;
    let lower = lipschitz_lower_bound(&mu, &Reference::Law(Measure::Discrete(nu.clone())), 20_000, &RngStream::new(8, 2))?;
    println!("lower {:.4} +- {:.4}   exact {w1:.4}", lower.estimate, lower.se);
    // Deep levels separate single atoms, so for empirical measures the bound
    // is smallest at a moderate depth.
    let dyadic: Vec<f64> = (0..=8).map(|j| dyadic_upper_bound(&mu, &nu, j)).collect::<otkit::Result<_>>()?;
    for (j, b) in dyadic.iter().enumerate() {
        println!("dyadic depth {j}: {b:.4}");
    }
    let (a, b) = (fourier_coefficients(&mu, 12.0)?, fourier_coefficients(&nu, 12.0)?);
    let (grid, best) = fourier_upper_bound_grid(&a, &b, &[0.001, 0.003, 0.01, 0.03, 0.1])?;
    for bound in &grid {
        println!("fourier eps {:<5}: {:.4} (head {:.4}, tail {:.2e})", bound.eps, bound.value, bound.head, bound.tail);
    }
    println!("best Fourier bound at eps {}", grid[best].eps);
    Ok(())
}
