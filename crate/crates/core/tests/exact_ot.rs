mod common;

use otkit::exact::{
    brute_force_ot, check_cyclical_monotonicity, solve_kantorovich, tv_distance, wasserstein, ExactSolver,
    PivotRule,
};
use common::random_measure;
use otkit::measures::{cost_matrix, DiscreteMeasure, RngStream};
use proptest::prelude::*;
use rand::Rng;

#[test]
fn matches_permutation_oracle_on_seeded_instances() {
    for seed in 0..3 {
        let mu = random_measure(seed, 0, 3, 2, true);
        let nu = random_measure(seed, 1, 3, 2, true);
        let exact = solve_kantorovich(&mu, &nu, 2.0).unwrap().cost;
        let brute = brute_force_ot(&mu, &nu, 2.0).unwrap();
        assert!((exact - brute).abs() <= 1e-9, "seed {seed}: {exact} vs {brute}");
    }
}

#[test]
fn four_point_clouds_in_the_plane() {
    let mu = random_measure(41, 0, 4, 2, true);
    let nu = random_measure(41, 1, 4, 2, true);
    let exact = solve_kantorovich(&mu, &nu, 2.0).unwrap().cost;
    assert!((exact - brute_force_ot(&mu, &nu, 2.0).unwrap()).abs() <= 1e-9);
}

#[test]
fn five_point_w1_is_an_assignment() {
    let mu = random_measure(5, 0, 5, 3, true);
    let nu = random_measure(5, 1, 5, 3, true);
    let w1 = wasserstein(&mu, &nu, 1.0).unwrap();
    assert!((w1 - brute_force_ot(&mu, &nu, 1.0).unwrap()).abs() <= 1e-9);
}

#[test]
fn pivot_rules_agree() {
    let mu = random_measure(8, 0, 40, 2, false);
    let nu = random_measure(8, 1, 55, 2, false);
    let first = ExactSolver::default().solve(&mu, &nu, 2.0).unwrap();
    let block = ExactSolver {
        pivot: PivotRule::BlockSearch,
        ..ExactSolver::default()
    }
    .solve(&mu, &nu, 2.0)
    .unwrap();
    assert!((first.cost - block.cost).abs() <= 1e-12);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn oracle_equivalence(seed in 0u64..10_000, n in 1usize..=7, d in 1usize..=3, p in prop::sample::select(vec![1.0, 2.0])) {
        let mu = random_measure(seed, 0, n, d, true);
        let nu = random_measure(seed, 1, n, d, true);
        let exact = solve_kantorovich(&mu, &nu, p).unwrap().cost;
        let brute = brute_force_ot(&mu, &nu, p).unwrap();
        prop_assert!((exact - brute).abs() <= 1e-9 * brute.max(1.0));
    }

    #[test]
    fn plan_is_basic_feasible_and_certified(seed in 0u64..10_000, n in 1usize..=20, m in 1usize..=20, d in 1usize..=3) {
        let mu = random_measure(seed, 0, n, d, false);
        let nu = random_measure(seed, 1, m, d, false);
        let plan = solve_kantorovich(&mu, &nu, 2.0).unwrap();
        let costs = cost_matrix(&mu, &nu, 2.0).unwrap();
        plan.verify(&costs, 1e-9).map_err(TestCaseError::fail)?;
        prop_assert!(plan.support(1e-12).len() <= n + m - 1);
        prop_assert!((plan.cost - plan.dual_value().unwrap()).abs() <= 1e-9);
        prop_assert_eq!(plan.dual_g.as_ref().unwrap()[0], 0.0);
        prop_assert!(check_cyclical_monotonicity(&plan, &mu, &nu, 3).holds);
    }

    #[test]
    fn metric_axioms(seed in 0u64..10_000, n in 1usize..=20, d in 1usize..=3) {
        let a = random_measure(seed, 0, n, d, false);
        let b = random_measure(seed, 1, n + 1, d, false);
        let c = random_measure(seed, 2, n + 2, d, false);
        for p in [1.0, 2.0] {
            let ab = wasserstein(&a, &b, p).unwrap();
            let ba = wasserstein(&b, &a, p).unwrap();
            let bc = wasserstein(&b, &c, p).unwrap();
            let ac = wasserstein(&a, &c, p).unwrap();
            prop_assert!((ab - ba).abs() <= 1e-9);
            prop_assert!(ac <= ab + bc + 1e-9);
            prop_assert!(wasserstein(&a, &a, p).unwrap() <= 1e-9);
        }
        prop_assert!(wasserstein(&a, &b, 1.0).unwrap() <= wasserstein(&a, &b, 2.0).unwrap() + 1e-9);
    }

    #[test]
    fn tv_dominates_transport(seed in 0u64..10_000, n in 1usize..=8) {
        // Shared grid points so that TV sees overlapping atoms.
        let mut rng = RngStream::new(seed, 3).rng();
        let grid: Vec<Vec<f64>> = (0..n).map(|_| vec![rng.random::<f64>(), rng.random::<f64>()]).collect();
        let weights = |rng: &mut rand_chacha::ChaCha20Rng| {
            let raw: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
            let t: f64 = raw.iter().sum();
            raw.into_iter().map(|w| w / t).collect::<Vec<_>>()
        };
        let mu = DiscreteMeasure::new(grid.clone(), weights(&mut rng)).unwrap();
        let nu = DiscreteMeasure::new(grid, weights(&mut rng)).unwrap();
        let diameter = 2f64.sqrt();
        let tv = tv_distance(&mu, &nu);
        for p in [1.0, 2.0] {
            let cost = solve_kantorovich(&mu, &nu, p).unwrap().cost;
            prop_assert!(cost <= diameter.powf(p) * tv + 1e-9);
        }
    }
}
