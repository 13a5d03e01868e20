#![allow(dead_code)]

use otkit::measures::{DiscreteMeasure, RngStream};
use rand::Rng;

/// `n` points uniform in `[0, 1]^d`, with uniform or random weights.
pub fn random_measure(seed: u64, stream: u64, n: usize, d: usize, uniform: bool) -> DiscreteMeasure {
    let mut rng = RngStream::new(seed, stream).rng();
    let coords: Vec<f64> = (0..n * d).map(|_| rng.random::<f64>()).collect();
    if uniform {
        return DiscreteMeasure::uniform_flat(d, coords).unwrap();
    }
    let raw: Vec<f64> = (0..n).map(|_| rng.random::<f64>() + 0.05).collect();
    let total: f64 = raw.iter().sum();
    DiscreteMeasure::from_flat(d, coords, raw.iter().map(|w| w / total).collect()).unwrap()
}

pub fn line(xs: &[f64]) -> DiscreteMeasure {
    DiscreteMeasure::uniform(xs.iter().map(|&x| vec![x]).collect()).unwrap()
}

pub fn weighted_line(xs: &[f64], ws: &[f64]) -> DiscreteMeasure {
    DiscreteMeasure::new(xs.iter().map(|&x| vec![x]).collect(), ws.to_vec()).unwrap()
}
