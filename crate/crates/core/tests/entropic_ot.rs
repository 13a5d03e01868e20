mod common;

use common::{line, random_measure, weighted_line};
use otkit::entropic::{
    entropic_map, entropic_primal, plan_from_duals, schrodinger_residual, sinkhorn, sinkhorn_divergence,
    SinkhornParams,
};
use otkit::exact::solve_kantorovich;
use otkit::measures::cost_matrix;
use otkit::univariate::monotone_map;
use otkit::DiscreteMeasure;

fn params(eps: f64) -> SinkhornParams {
    SinkhornParams::new(eps, 1e-9)
}

/// Entry (0, 0) of the 2x2 Schrödinger solution: the plan with the given
/// marginals whose cross ratio equals `exp(-(C00 + C11 - C01 - C10) / eps)`,
/// found by bisection.
fn two_by_two_oracle(p0: f64, q0: f64, c: [[f64; 2]; 2], eps: f64) -> f64 {
    let target = -(c[0][0] + c[1][1] - c[0][1] - c[1][0]) / eps;
    let log_ratio = |a: f64| a.ln() + (1.0 - p0 - q0 + a).ln() - (p0 - a).ln() - (q0 - a).ln();
    let (mut lo, mut hi) = ((p0 + q0 - 1.0).max(0.0), p0.min(q0));
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if log_ratio(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[test]
fn two_by_two_matches_bisection() {
    for (mu, nu, eps) in [
        (line(&[0.0, 1.0]), line(&[0.0, 1.0]), 0.5),
        (weighted_line(&[0.0, 1.0], &[0.3, 0.7]), weighted_line(&[0.2, 1.5], &[0.6, 0.4]), 0.5),
        (weighted_line(&[0.0, 2.0], &[0.8, 0.2]), weighted_line(&[-1.0, 1.0], &[0.5, 0.5]), 2.0),
    ] {
        let r = sinkhorn(&mu, &nu, SinkhornParams::new(eps, 1e-12)).unwrap().ensure_converged().unwrap();
        let c = cost_matrix(&mu, &nu, 2.0).unwrap();
        let a = two_by_two_oracle(mu.weights()[0], nu.weights()[0], [[c[(0, 0)], c[(0, 1)]], [c[(1, 0)], c[(1, 1)]]], eps);
        let expected = [[a, mu.weights()[0] - a], [nu.weights()[0] - a, 1.0 - mu.weights()[0] - nu.weights()[0] + a]];
        for i in 0..2 {
            for j in 0..2 {
                assert!((r.plan[(i, j)] - expected[i][j]).abs() < 1e-10, "{i}{j}: {} vs {}", r.plan[(i, j)], expected[i][j]);
            }
        }
    }
}

#[test]
fn small_eps_transport_term_is_close_to_exact() {
    let mu = random_measure(8, 0, 6, 2, true);
    let nu = random_measure(8, 1, 6, 2, true);
    let eps = 1e-2;
    let r = sinkhorn(&mu, &nu, params(eps)).unwrap().ensure_converged().unwrap();
    let exact = solve_kantorovich(&mu, &nu, 2.0).unwrap().cost;
    assert!((r.transport_cost - exact).abs() <= 5.0 * eps * 36f64.ln());
}

#[test]
fn entropic_map_limits() {
    let mu = random_measure(2, 0, 5, 2, false);
    let nu = random_measure(2, 1, 7, 2, false);
    let r = sinkhorn(&mu, &nu, params(1e6)).unwrap();
    let mean = nu.mean();
    for img in entropic_map(&r, &mu, &nu) {
        assert!((img[0] - mean[0]).abs() < 1e-4 && (img[1] - mean[1]).abs() < 1e-4);
    }

    let xs = line(&[0.0, 0.1, 0.35, 0.5, 0.8, 1.0]);
    let ys = line(&[0.2, 0.3, 0.45, 0.9, 1.1, 1.4]);
    let r = sinkhorn(&xs, &ys, SinkhornParams { max_iter: 1_000_000, ..params(1e-3) }).unwrap();
    let map = monotone_map(&xs, &ys).unwrap();
    for (x, img) in xs.points().zip(entropic_map(&r, &xs, &ys)) {
        assert!((img[0] - map.apply(x[0]).unwrap()).abs() < 0.05);
    }
}

#[test]
fn entropic_map_is_odd_under_reflection() {
    let mu = weighted_line(&[-1.0, -0.3, 0.4, 2.0], &[0.1, 0.4, 0.3, 0.2]);
    let nu = mu.map_points(|x| vec![-x[0]]).unwrap();
    let both = DiscreteMeasure::new(
        mu.points().chain(nu.points()).map(|x| x.to_vec()).collect(),
        mu.weights().iter().chain(nu.weights()).map(|w| w / 2.0).collect(),
    )
    .unwrap();
    // A measure symmetric about 0 transported to itself.
    let r = sinkhorn(&both, &both, params(0.3)).unwrap().ensure_converged().unwrap();
    let img = entropic_map(&r, &both, &both);
    let n = mu.len();
    for i in 0..n {
        assert!((img[i][0] + img[i + n][0]).abs() < 1e-9, "{} vs {}", img[i][0], img[i + n][0]);
    }
}

#[test]
fn duality_residual_and_ascent() {
    for seed in 0..10 {
        let mu = random_measure(seed, 0, 8, 2, false);
        let nu = random_measure(seed, 1, 6, 2, false);
        for eps in [0.05, 0.5, 5.0] {
            let r = sinkhorn(&mu, &nu, SinkhornParams::new(eps, 1e-12)).unwrap().ensure_converged().unwrap();
            assert!((r.primal_value - r.dual_value).abs() <= 1e-8);
            assert!(schrodinger_residual(&r, &mu, &nu) <= 1e-9);
            for pair in r.dual_trace.windows(2) {
                assert!(pair[1] >= pair[0] - 1e-12);
            }
        }
    }
}

#[test]
fn dual_shift_leaves_plan_and_primal_unchanged() {
    let mu = random_measure(4, 0, 5, 2, false);
    let nu = random_measure(4, 1, 7, 2, false);
    let eps = 0.2;
    let r = sinkhorn(&mu, &nu, params(eps)).unwrap();
    let c = cost_matrix(&mu, &nu, 2.0).unwrap();
    let base = plan_from_duals(&r.dual_f, &r.dual_g, &c, mu.weights(), nu.weights(), eps);
    let lambda = 0.37;
    let f: Vec<f64> = r.dual_f.iter().map(|v| v + lambda).collect();
    let g: Vec<f64> = r.dual_g.iter().map(|v| v - lambda).collect();
    let shifted = plan_from_duals(&f, &g, &c, mu.weights(), nu.weights(), eps);
    assert!((&base - &shifted).abs().max() <= 1e-12);
    let a = entropic_primal(&base, &c, mu.weights(), nu.weights(), eps);
    let b = entropic_primal(&shifted, &c, mu.weights(), nu.weights(), eps);
    assert!((a - b).abs() <= 1e-12);
}

#[test]
fn primal_value_grows_with_eps() {
    for seed in 0..5 {
        let mu = random_measure(seed, 0, 6, 2, false);
        let nu = random_measure(seed, 1, 6, 2, false);
        let values: Vec<f64> = [0.01, 0.1, 1.0, 10.0]
            .iter()
            .map(|&e| sinkhorn(&mu, &nu, params(e)).unwrap().primal_value)
            .collect();
        assert!(values.windows(2).all(|w| w[1] >= w[0]), "{values:?}");
    }
}

#[test]
fn transport_term_approaches_exact_as_eps_shrinks() {
    for seed in 0..20 {
        let mu = random_measure(seed, 0, 7, 2, true);
        let nu = random_measure(seed, 1, 7, 2, true);
        let exact = solve_kantorovich(&mu, &nu, 2.0).unwrap().cost;
        let gaps: Vec<f64> = [1.0, 0.3, 0.1, 0.03]
            .iter()
            .map(|&e| (sinkhorn(&mu, &nu, params(e)).unwrap().transport_cost - exact).abs())
            .collect();
        assert!(gaps.windows(2).all(|w| w[1] <= w[0]), "seed {seed}: {gaps:?}");
    }
}

#[test]
fn divergence_is_deterministic() {
    let mu = random_measure(12, 0, 9, 3, false);
    let nu = random_measure(12, 1, 11, 3, false);
    let a = sinkhorn_divergence(&mu, &nu, params(0.1)).unwrap();
    let b = sinkhorn_divergence(&mu, &nu, params(0.1)).unwrap();
    assert_eq!(a.to_bits(), b.to_bits());
    assert!(sinkhorn_divergence(&mu, &mu, params(0.1)).unwrap().abs() <= 1e-8);
}
