use nalgebra::{DMatrix, DVector};
use otkit::exact::ExactSolver;
use otkit::gaussian::{estimate_affine_map, gaussian_barycenter, gaussian_brenier_map, gaussian_w2, gaussian_w2_squared};
use otkit::linalg::{hs_norm, min_eigenvalue, sqrtm};
use otkit::measures::{sample, GaussianMeasure, Measure, RngStream};
use proptest::prelude::*;
use rand::Rng;
use rand_distr::StandardNormal;

fn random_gaussian(seed: u64, stream: u64, d: usize) -> GaussianMeasure {
    let mut rng = RngStream::new(seed, stream).rng();
    let b = DMatrix::from_fn(d, d, |_, _| rng.sample::<f64, _>(StandardNormal));
    let mean = DVector::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal));
    GaussianMeasure::new(mean, &b * b.transpose() + DMatrix::identity(d, d) * 0.2).unwrap()
}

fn functional(s: &DMatrix<f64>, m: &DVector<f64>, inputs: &[GaussianMeasure], w: &[f64]) -> f64 {
    let b = GaussianMeasure::new(m.clone(), s.clone()).unwrap();
    0.5 * inputs.iter().zip(w).map(|(g, wk)| wk * gaussian_w2_squared(&b, g).unwrap()).sum::<f64>()
}

#[test]
fn closed_form_is_below_the_empirical_distance() {
    let solver = ExactSolver::with_cap(1 << 25);
    let a = random_gaussian(1, 0, 2);
    let b = random_gaussian(1, 1, 2);
    let xa = sample(&Measure::Gaussian(a), 5000, &RngStream::new(2, 0)).unwrap();
    let xb = sample(&Measure::Gaussian(b), 5000, &RngStream::new(2, 1)).unwrap();
    let empirical = solver.wasserstein(&xa, &xb, 2.0).unwrap();
    let matched = gaussian_w2(&GaussianMeasure::moment_match(&xa), &GaussianMeasure::moment_match(&xb)).unwrap();
    assert!(matched <= empirical + 0.1, "{matched} vs {empirical}");
}

#[test]
fn affine_estimate_recovers_the_square_root() {
    let target = GaussianMeasure::from_slices(&[1.0, -2.0], &[&[2.0, 0.6], &[0.6, 1.0]]).unwrap();
    let xs = sample(&Measure::Gaussian(target.clone()), 100_000, &RngStream::new(11, 0)).unwrap();
    let est = estimate_affine_map(&xs).unwrap();
    assert!(!est.rank_deficient);
    assert!(hs_norm(&(&est.map.a - sqrtm(target.cov()))) <= 0.05);
}

#[test]
fn barycenter_of_commuting_covariances_averages_roots() {
    let a = GaussianMeasure::from_slices(&[0.0, 0.0], &[&[4.0, 0.0], &[0.0, 1.0]]).unwrap();
    let b = GaussianMeasure::from_slices(&[2.0, 0.0], &[&[1.0, 0.0], &[0.0, 9.0]]).unwrap();
    let w = [0.25, 0.75];
    let bary = gaussian_barycenter(&[a, b], &w).unwrap();
    let root = DMatrix::from_diagonal(&DVector::from_vec(vec![0.25 * 2.0 + 0.75, 0.25 + 0.75 * 3.0]));
    assert!(hs_norm(&(sqrtm(bary.measure.cov()) - root)) < 1e-8);
    assert!((bary.measure.mean()[0] - 1.5).abs() < 1e-15);
}

#[test]
fn barycenter_is_first_order_stationary() {
    let inputs: Vec<GaussianMeasure> = (0..3).map(|k| random_gaussian(40, k, 3)).collect();
    let w = [0.2, 0.5, 0.3];
    let bary = gaussian_barycenter(&inputs, &w).unwrap();
    assert!(bary.residual <= 1e-8);
    for pair in bary.functional.windows(2) {
        assert!(pair[1] <= pair[0] + 1e-10, "{pair:?}");
    }
    let m = bary.measure.mean().clone();
    let s = bary.measure.cov().clone();
    let f0 = functional(&s, &m, &inputs, &w);
    let mut rng = RngStream::new(41, 0).rng();
    for _ in 0..10 {
        let e = DMatrix::from_fn(3, 3, |_, _| rng.sample::<f64, _>(StandardNormal));
        let e = (&e + e.transpose()) * 0.5;
        let e = &e / hs_norm(&e) * 1e-4;
        for sign in [1.0, -1.0] {
            let f = functional(&(&s + &e * sign), &m, &inputs, &w);
            assert!(f >= f0 - 1e-6, "{f} < {f0}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn brenier_map_is_symmetric_psd_and_pushes_forward(seed in 0u64..100_000, d in 1usize..=4) {
        let a = random_gaussian(seed, 0, d);
        let b = random_gaussian(seed, 1, d);
        let map = gaussian_brenier_map(&a, &b).unwrap();
        prop_assert!(hs_norm(&(&map.a - map.a.transpose())) <= 1e-9);
        prop_assert!(min_eigenvalue(&map.a) >= -1e-9);
        let pushed = &map.a * a.cov() * &map.a;
        prop_assert!(hs_norm(&(pushed - b.cov())) <= 1e-8 * (1.0 + hs_norm(b.cov())));
        let image = map.apply(a.mean());
        prop_assert!((image - b.mean()).norm() <= 1e-9 * (1.0 + b.mean().norm()));
    }

    #[test]
    fn w2_is_a_metric(seed in 0u64..100_000, d in 1usize..=3) {
        let a = random_gaussian(seed, 0, d);
        let b = random_gaussian(seed, 1, d);
        let c = random_gaussian(seed, 2, d);
        let ab = gaussian_w2(&a, &b).unwrap();
        prop_assert!((ab - gaussian_w2(&b, &a).unwrap()).abs() <= 1e-9);
        prop_assert!(gaussian_w2(&a, &a).unwrap() <= 1e-6);
        prop_assert!(ab <= gaussian_w2(&a, &c).unwrap() + gaussian_w2(&c, &b).unwrap() + 1e-9);
    }
}
