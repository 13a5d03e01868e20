use otkit::bench::{emit_report, load_report, rate_experiment, RateStatistic, Sampler};
use otkit::GaussianMeasure;

fn grid(max: usize) -> Vec<usize> {
    std::iter::successors(Some(32), |n| Some(n * 2)).take_while(|n| *n <= max).collect()
}

#[test]
fn report_round_trips_the_fit() {
    let table = rate_experiment(RateStatistic::SlicedW1 { directions: 20 }, &Sampler::UnitBall(3), &grid(256), 4, 3).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("rates.csv");
    let summary = emit_report(&table, &path).unwrap();
    assert_eq!(summary, dir.path().join("rates.json"));
    let back = load_report(&path).unwrap();
    assert_eq!(back.records, table.records);
    assert!((back.slope - table.slope).abs() <= 1e-12);
    assert!((back.intercept - table.intercept).abs() <= 1e-12);
}

#[test]
fn same_seed_gives_identical_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let write = |name: &str| {
        let table = rate_experiment(RateStatistic::W1Empirical, &Sampler::UnitCube(2), &grid(128), 5, 11).unwrap();
        let path = dir.path().join(name);
        let summary = emit_report(&table, &path).unwrap();
        (std::fs::read(path).unwrap(), std::fs::read(summary).unwrap())
    };
    assert_eq!(write("a.csv"), write("b.csv"));
}

#[test]
fn thread_count_does_not_change_the_records() {
    let run = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| {
            rate_experiment(RateStatistic::Mmd { sigma: 1.0 }, &Sampler::UnitCube(3), &grid(128), 6, 5).unwrap()
        })
    };
    assert_eq!(run(1).records, run(3).records);
}

#[test]
fn w1_slows_down_with_dimension_while_mmd_and_sliced_do_not() {
    let ns = grid(512);
    let reps = 10;
    let mut w1 = Vec::new();
    for d in [1, 3, 5] {
        let slope = rate_experiment(RateStatistic::W1Empirical, &Sampler::UnitCube(d), &ns, reps, 1).unwrap().slope;
        w1.push(slope.abs());
        let g = Sampler::Gaussian(GaussianMeasure::standard(d));
        for (stat, sampler) in [
            (RateStatistic::Mmd { sigma: 1.0 }, g),
            (RateStatistic::SlicedW1 { directions: 200 }, Sampler::UnitBall(d)),
        ] {
            let slope = rate_experiment(stat, &sampler, &ns, reps, 1).unwrap().slope;
            assert!((-0.6..=-0.4).contains(&slope), "{} d={d}: {slope}", stat.name());
        }
    }
    assert!(w1.windows(2).all(|p| p[1] <= p[0]), "{w1:?}");
}
