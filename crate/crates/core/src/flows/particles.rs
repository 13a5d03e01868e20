use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use super::{FunctionalSpec, ParticleEnsemble, Potential};
use crate::error::{Error, Result};
use crate::surrogate::Kernel;

/// Maximum number of step halvings before a weight update gives up.
pub const MAX_HALVINGS: usize = 30;

const PAR_THRESHOLD: usize = 64;

/// Evaluates `f` for every particle index, in parallel for large ensembles.
pub(crate) fn per_particle<T: Send>(n: usize, f: impl Fn(usize) -> T + Sync + Send) -> Vec<T> {
    if n >= PAR_THRESHOLD {
        (0..n).into_par_iter().map(f).collect()
    } else {
        (0..n).map(f).collect()
    }
}

fn check_dt(dt: f64) -> Result<()> {
    if dt > 0.0 && dt.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("step size must be positive, got {dt}")))
    }
}

fn diff(x: &[f64], y: &[f64]) -> Vec<f64> {
    x.iter().zip(y).map(|(a, b)| a - b).collect()
}

fn euler_move(ens: &ParticleEnsemble, velocities: &[Vec<f64>], dt: f64) -> Vec<Vec<f64>> {
    ens.positions
        .iter()
        .zip(velocities)
        .map(|(x, v)| x.iter().zip(v).map(|(a, b)| a + dt * b).collect())
        .collect()
}

/// `sum_i w_i V(x_i) + 1/2 sum_ij w_i w_j W(x_i - x_j)`.
pub fn energy(ens: &ParticleEnsemble, spec: &FunctionalSpec) -> f64 {
    let mut total = 0.0;
    if let Some(v) = &spec.potential {
        total += ens.positions.iter().zip(&ens.weights).map(|(x, w)| w * v.value(x)).sum::<f64>();
    }
    if let Some(w) = &spec.interaction {
        for (xi, wi) in ens.positions.iter().zip(&ens.weights) {
            for (xj, wj) in ens.positions.iter().zip(&ens.weights) {
                total += 0.5 * wi * wj * w.value(&diff(xi, xj));
            }
        }
    }
    total
}

/// One explicit Euler step of the Wasserstein gradient flow of the potential
/// and interaction energies; weights are left alone.
pub fn wgf_step(ens: &ParticleEnsemble, spec: &FunctionalSpec, dt: f64) -> Result<ParticleEnsemble> {
    check_dt(dt)?;
    if spec.entropy > 0.0 {
        return Err(Error::EntropyNotSupported);
    }
    let d = ens.dim();
    let velocities = per_particle(ens.len(), |i| {
        let xi = &ens.positions[i];
        let mut g = match &spec.potential {
            Some(v) => v.gradient(xi),
            None => vec![0.0; d],
        };
        if let Some(w) = &spec.interaction {
            for (xj, wj) in ens.positions.iter().zip(&ens.weights) {
                for (gk, dk) in g.iter_mut().zip(w.gradient(&diff(xi, xj))) {
                    *gk += wj * dk;
                }
            }
        }
        g.into_iter().map(|v| -v).collect::<Vec<f64>>()
    });
    Ok(ParticleEnsemble {
        positions: euler_move(ens, &velocities, dt),
        weights: ens.weights.clone(),
        time: ens.time + dt,
    })
}

/// Unadjusted Langevin step `x - h grad V(x) + sqrt(2h) xi`, particles in order.
pub fn langevin_step<R: Rng + ?Sized>(
    ens: &ParticleEnsemble,
    potential: &Potential,
    h: f64,
    rng: &mut R,
) -> Result<ParticleEnsemble> {
    check_dt(h)?;
    let scale = (2.0 * h).sqrt();
    let positions = ens
        .positions
        .iter()
        .map(|x| {
            let g = potential.gradient(x);
            x.iter()
                .zip(g)
                .map(|(xk, gk)| xk - h * gk + scale * rng.sample::<f64, _>(StandardNormal))
                .collect()
        })
        .collect();
    Ok(ParticleEnsemble {
        positions,
        weights: ens.weights.clone(),
        time: ens.time + h,
    })
}

/// Stein variational gradient descent step, all particles updated at once:
/// `x_i -= dt sum_j w_j [k(x_i - x_j) grad V(x_j) + grad k(x_i - x_j)]`.
pub fn svgd_step(ens: &ParticleEnsemble, potential: &Potential, kernel: Kernel, dt: f64) -> Result<ParticleEnsemble> {
    check_dt(dt)?;
    let d = ens.dim();
    let grads: Vec<Vec<f64>> = ens.positions.iter().map(|x| potential.gradient(x)).collect();
    let velocities = per_particle(ens.len(), |i| {
        let xi = &ens.positions[i];
        let mut v = vec![0.0; d];
        for ((xj, gj), wj) in ens.positions.iter().zip(&grads).zip(&ens.weights) {
            let k = kernel.eval(xi, xj);
            let dk = kernel.grad(&diff(xi, xj));
            for c in 0..d {
                v[c] -= wj * (k * gj[c] + dk[c]);
            }
        }
        v
    });
    Ok(ParticleEnsemble {
        positions: euler_move(ens, &velocities, dt),
        weights: ens.weights.clone(),
        time: ens.time + dt,
    })
}

/// Multiplicative Euler update `w_i (1 + dt r_i)` followed by renormalization.
/// `None` if a positive weight would become nonpositive.
pub(crate) fn reweight(weights: &[f64], rates: &[f64], dt: f64) -> Option<Vec<f64>> {
    let mut out = Vec::with_capacity(weights.len());
    for (w, r) in weights.iter().zip(rates) {
        let next = w * (1.0 + dt * r);
        if *w > 0.0 && !(next > 0.0) {
            return None;
        }
        out.push(next);
    }
    let total: f64 = out.iter().sum();
    out.iter_mut().for_each(|w| *w /= total);
    Some(out)
}

/// One Wasserstein–Fisher–Rao particle step. Positions move along
/// `-grad dF`; weights follow `-(dF(x_i) - sum_j w_j dF(x_j)) w_i` and are
/// renormalized. When a weight would turn nonpositive the step is halved, up to
/// [`MAX_HALVINGS`] times. The returned ensemble's time advances by the step
/// actually taken.
pub fn wfr_step<F, G>(ens: &ParticleEnsemble, first_variation: F, gradient: G, dt: f64) -> Result<ParticleEnsemble>
where
    F: Fn(&ParticleEnsemble, &[f64]) -> f64,
    G: Fn(&ParticleEnsemble, &[f64]) -> Vec<f64>,
{
    check_dt(dt)?;
    let values: Vec<f64> = ens.positions.iter().map(|x| first_variation(ens, x)).collect();
    let mean: f64 = values.iter().zip(&ens.weights).map(|(v, w)| v * w).sum();
    let rates: Vec<f64> = values.iter().map(|v| -(v - mean)).collect();
    let velocities: Vec<Vec<f64>> = ens
        .positions
        .iter()
        .map(|x| gradient(ens, x).into_iter().map(|g| -g).collect())
        .collect();
    let mut h = dt;
    for _ in 0..=MAX_HALVINGS {
        if let Some(weights) = reweight(&ens.weights, &rates, h) {
            return Ok(ParticleEnsemble {
                positions: euler_move(ens, &velocities, h),
                weights,
                time: ens.time + h,
            });
        }
        h *= 0.5;
    }
    Err(Error::StepCollapse { halvings: MAX_HALVINGS })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flows::Interaction;
    use crate::measures::RngStream;

    #[test]
    fn quadratic_potential_decays_exponentially() {
        let spec = FunctionalSpec {
            potential: Some(Potential::quadratic()),
            ..Default::default()
        };
        let mut e = ParticleEnsemble::uniform(vec![vec![1.5, -0.5]]).unwrap();
        for _ in 0..10_000 {
            e = wgf_step(&e, &spec, 1e-4).unwrap();
        }
        let decay = (-1.0f64).exp();
        assert!((e.positions[0][0] - 1.5 * decay).abs() < 1e-3);
        assert!((e.positions[0][1] + 0.5 * decay).abs() < 1e-3);
    }

    #[test]
    fn critical_points_are_fixed() {
        let spec = FunctionalSpec {
            potential: Some(Potential::quadratic()),
            ..Default::default()
        };
        let e = ParticleEnsemble::uniform(vec![vec![0.0], vec![0.0]]).unwrap();
        assert_eq!(wgf_step(&e, &spec, 0.1).unwrap().positions, e.positions);
    }

    #[test]
    fn entropy_is_rejected() {
        let spec = FunctionalSpec {
            entropy: 1.0,
            ..Default::default()
        };
        let e = ParticleEnsemble::uniform(vec![vec![0.0]]).unwrap();
        assert!(matches!(wgf_step(&e, &spec, 0.1), Err(Error::EntropyNotSupported)));
    }

    #[test]
    fn quadratic_interaction_keeps_center_of_mass() {
        let spec = FunctionalSpec {
            interaction: Some(Interaction::quadratic()),
            ..Default::default()
        };
        let mut e = ParticleEnsemble::uniform(vec![vec![-1.0], vec![3.0]]).unwrap();
        let dt = 1e-3;
        for _ in 0..1000 {
            let gap = e.positions[1][0] - e.positions[0][0];
            let next = wgf_step(&e, &spec, dt).unwrap();
            let com = 0.5 * (next.positions[0][0] + next.positions[1][0]);
            assert!((com - 1.0).abs() < 1e-12);
            // Each particle feels half the gap, so the gap shrinks by (1 - dt).
            let next_gap = next.positions[1][0] - next.positions[0][0];
            assert!((next_gap - gap * (1.0 - dt)).abs() < 1e-12);
            e = next;
        }
    }

    #[test]
    fn langevin_is_seeded() {
        let e = ParticleEnsemble::uniform(vec![vec![0.0, 1.0]; 3]).unwrap();
        let v = Potential::quadratic();
        let run = |seed| {
            let mut rng = RngStream::new(seed, 0).rng();
            let mut x = e.clone();
            for _ in 0..5 {
                x = langevin_step(&x, &v, 0.1, &mut rng).unwrap();
            }
            x
        };
        assert_eq!(run(4), run(4));
        assert_ne!(run(4), run(5));
    }

    #[test]
    fn svgd_singleton_at_mode_is_fixed() {
        let e = ParticleEnsemble::uniform(vec![vec![0.0, 0.0]]).unwrap();
        let next = svgd_step(&e, &Potential::quadratic(), Kernel::Gaussian { sigma: 1.0 }, 0.1).unwrap();
        assert_eq!(next.positions, e.positions);
    }

    #[test]
    fn wfr_single_step_arithmetic() {
        let e = ParticleEnsemble::uniform(vec![vec![0.0], vec![1.0]]).unwrap();
        let next = wfr_step(&e, |_, x| if x[0] == 0.0 { 1.0 } else { 0.0 }, |_, _| vec![0.0], 0.1).unwrap();
        // 0.5 (1 - 0.1 * 0.5) and 0.5 (1 + 0.1 * 0.5) already sum to one.
        assert!((next.weights[0] - 0.475).abs() < 1e-15);
        assert!((next.weights[1] - 0.525).abs() < 1e-15);
        assert_eq!(next.positions, e.positions);
    }

    #[test]
    fn wfr_constant_variation_keeps_weights() {
        let e = ParticleEnsemble::new(vec![vec![0.0], vec![1.0]], vec![0.3, 0.7]).unwrap();
        let next = wfr_step(&e, |_, _| 2.5, |_, x| vec![x[0]], 0.2).unwrap();
        assert_eq!(next.weights, e.weights);
    }

    #[test]
    fn wfr_halves_then_collapses() {
        let e = ParticleEnsemble::uniform(vec![vec![0.0], vec![1.0]]).unwrap();
        let dv = |_: &ParticleEnsemble, x: &[f64]| if x[0] == 0.0 { 4.0 } else { 0.0 };
        // Rate -2 on the first weight: dt = 1 is halved to 0.25.
        let next = wfr_step(&e, dv, |_, _| vec![0.0], 1.0).unwrap();
        assert_eq!(next.time, 0.25);
        let err = wfr_step(&e, |_, x| if x[0] == 0.0 { 1e300 } else { 0.0 }, |_, _| vec![0.0], 1.0);
        assert!(matches!(err, Err(Error::StepCollapse { halvings: 30 })));
    }
}
