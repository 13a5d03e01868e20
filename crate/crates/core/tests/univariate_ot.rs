mod common;

use common::{line, random_measure};
use otkit::exact::solve_kantorovich;
use otkit::measures::{sample, GaussianMeasure, Measure, RngStream};
use otkit::univariate::{monotone_map, w1_via_cdf, wp_via_quantiles};
use proptest::prelude::*;

#[test]
fn translation_moves_every_quantile_by_c() {
    let mu = sample(&Measure::Gaussian(GaussianMeasure::standard(1)), 200, &RngStream::new(5, 0)).unwrap();
    let c = 1.75;
    let shifted = mu.map_points(|x| vec![x[0] + c]).unwrap();
    for p in [1.0, 2.0, 3.0] {
        let w = wp_via_quantiles(&mu, &shifted, p).unwrap();
        assert!((w - c).abs() < 1e-12, "p = {p}: {w}");
    }
}

#[test]
fn identical_measures_are_at_distance_zero() {
    let mu = random_measure(3, 0, 9, 1, false);
    assert_eq!(w1_via_cdf(&mu, &mu).unwrap(), 0.0);
    assert_eq!(wp_via_quantiles(&mu, &mu, 2.0).unwrap(), 0.0);
}

#[test]
fn map_sends_order_to_order() {
    let map = monotone_map(&line(&[2.0, 1.0]), &line(&[4.0, 3.0])).unwrap();
    assert_eq!(map.apply(1.0), Some(3.0));
    assert_eq!(map.apply(2.0), Some(4.0));
    assert_eq!(map.apply(1.5), None);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn quantile_formula_matches_the_exact_solver(
        seed in 0u64..100_000,
        n in 1usize..=12,
        m in 1usize..=12,
        p in prop::sample::select(vec![1.0, 2.0]),
    ) {
        let mu = random_measure(seed, 0, n, 1, false);
        let nu = random_measure(seed, 1, m, 1, false);
        let closed = wp_via_quantiles(&mu, &nu, p).unwrap().powf(p);
        let exact = solve_kantorovich(&mu, &nu, p).unwrap().cost;
        prop_assert!((closed - exact).abs() <= 1e-9, "{closed} vs {exact}");
    }

    #[test]
    fn cdf_and_quantile_forms_agree(seed in 0u64..100_000, n in 1usize..=15, m in 1usize..=15) {
        let mu = random_measure(seed, 0, n, 1, false);
        let nu = random_measure(seed, 1, m, 1, false);
        let a = w1_via_cdf(&mu, &nu).unwrap();
        let b = wp_via_quantiles(&mu, &nu, 1.0).unwrap();
        prop_assert!((a - b).abs() <= 1e-12, "{a} vs {b}");
    }

    #[test]
    fn pushforward_reproduces_the_target(seed in 0u64..100_000, n in 1usize..=10, k in 1usize..=4) {
        // Every target atom gets k source atoms of equal mass, so the map exists.
        let mu = random_measure(seed, 0, n * k, 1, true);
        let nu = random_measure(seed, 1, n, 1, true);
        let map = monotone_map(&mu, &nu).unwrap();
        prop_assert!(map.target.windows(2).all(|w| w[0] <= w[1]));
        let image = map.pushforward(&mu).unwrap();
        for y in nu.points() {
            let target_mass: f64 = nu.points().zip(nu.weights()).filter(|(z, _)| z == &y).map(|(_, w)| w).sum();
            let pushed: f64 = image.points().zip(image.weights()).filter(|(z, _)| z == &y).map(|(_, w)| w).sum();
            prop_assert!((target_mass - pushed).abs() < 1e-12);
        }
    }
}
