//! Measures, seeded random streams and ground costs.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg;

/// Tolerance on the weight sum of user-provided measures.
pub const INPUT_WEIGHT_TOL: f64 = 1e-6;
/// Tolerance on the weight sum maintained internally.
pub const WEIGHT_TOL: f64 = 1e-12;

/// A finitely supported probability measure `sum_i w_i delta_{x_i}` on `R^d`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteMeasure {
    dim: usize,
    coords: Vec<f64>,
    weights: Vec<f64>,
}

impl DiscreteMeasure {
    /// Builds a measure, renormalizing weights that sum to 1 within `1e-6`.
    pub fn new(points: Vec<Vec<f64>>, weights: Vec<f64>) -> Result<Self> {
        let dim = points.first().map(Vec::len).unwrap_or(0);
        if let Some(bad) = points.iter().find(|p| p.len() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: bad.len(),
            });
        }
        let coords = points.into_iter().flatten().collect();
        Self::from_flat(dim, coords, weights)
    }

    /// Builds a measure from row-major coordinates.
    pub fn from_flat(dim: usize, coords: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Invariant("points must have dimension >= 1".into()));
        }
        if weights.is_empty() {
            return Err(Error::Invariant("a measure needs at least one atom".into()));
        }
        if coords.len() != dim * weights.len() {
            return Err(Error::Invariant(format!(
                "{} coordinates do not describe {} points in dimension {}",
                coords.len(),
                weights.len(),
                dim
            )));
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::Invariant("non-finite coordinate".into()));
        }
        if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w >= 0.0)) {
            return Err(Error::Invariant(format!("weight {w} is not a nonnegative real")));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > INPUT_WEIGHT_TOL {
            return Err(Error::Invariant(format!("weights sum to {total}, not 1")));
        }
        // Sums already within the internal tolerance are kept bit-exact so that
        // save/load round-trips do not perturb weights.
        let weights = if (total - 1.0).abs() <= WEIGHT_TOL {
            weights
        } else {
            weights.into_iter().map(|w| w / total).collect()
        };
        Ok(Self {
            dim,
            coords,
            weights,
        })
    }

    /// Uniform weights `1/n` on the given points.
    pub fn uniform(points: Vec<Vec<f64>>) -> Result<Self> {
        let n = points.len();
        Self::new(points, vec![1.0 / n as f64; n])
    }

    pub fn uniform_flat(dim: usize, coords: Vec<f64>) -> Result<Self> {
        let n = if dim == 0 { 0 } else { coords.len() / dim };
        Self::from_flat(dim, coords, vec![1.0 / n.max(1) as f64; n])
    }

    pub fn dirac(point: Vec<f64>) -> Result<Self> {
        Self::new(vec![point], vec![1.0])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn points(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.coords.chunks_exact(self.dim)
    }

    pub fn to_points(&self) -> Vec<Vec<f64>> {
        self.points().map(<[f64]>::to_vec).collect()
    }

    /// True when all weights are equal to `1/n` up to rounding.
    pub fn is_uniform(&self) -> bool {
        let target = 1.0 / self.len() as f64;
        self.weights.iter().all(|w| (w - target).abs() <= 1e-12)
    }

    pub fn mean(&self) -> DVector<f64> {
        let mut m = DVector::zeros(self.dim);
        for (x, w) in self.points().zip(&self.weights) {
            for (k, xk) in x.iter().enumerate() {
                m[k] += w * xk;
            }
        }
        m
    }

    /// Weighted covariance with `1/n`-style normalization (weights sum to one).
    pub fn covariance(&self) -> DMatrix<f64> {
        let m = self.mean();
        let mut c = DMatrix::zeros(self.dim, self.dim);
        for (x, w) in self.points().zip(&self.weights) {
            let d = DVector::from_iterator(self.dim, x.iter().zip(m.iter()).map(|(a, b)| a - b));
            c += (&d * d.transpose()) * *w;
        }
        c
    }

    /// The same atoms moved by `f`.
    pub fn map_points(&self, mut f: impl FnMut(&[f64]) -> Vec<f64>) -> Result<Self> {
        let pts: Vec<Vec<f64>> = self.points().map(&mut f).collect();
        Self::new(pts, self.weights.clone())
    }

    pub(crate) fn from_parts_unchecked(dim: usize, coords: Vec<f64>, weights: Vec<f64>) -> Self {
        debug_assert_eq!(coords.len(), dim * weights.len());
        Self {
            dim,
            coords,
            weights,
        }
    }
}

/// A Gaussian `N(mean, cov)` with symmetric positive semidefinite covariance.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianMeasure {
    mean: DVector<f64>,
    cov: DMatrix<f64>,
}

impl GaussianMeasure {
    pub fn new(mean: DVector<f64>, cov: DMatrix<f64>) -> Result<Self> {
        let d = mean.len();
        if d == 0 {
            return Err(Error::Invariant("gaussian mean must have dimension >= 1".into()));
        }
        if cov.nrows() != d || cov.ncols() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: cov.nrows().max(cov.ncols()),
            });
        }
        if mean.iter().chain(cov.iter()).any(|v| !v.is_finite()) {
            return Err(Error::Invariant("non-finite gaussian parameter".into()));
        }
        let asym = (&cov - cov.transpose()).amax();
        if asym > 1e-10 {
            return Err(Error::Invariant(format!(
                "covariance is not symmetric (max asymmetry {asym:e})"
            )));
        }
        let min_eig = linalg::min_eigenvalue(&cov);
        if min_eig < -1e-10 {
            return Err(Error::NonPsd {
                min_eigenvalue: min_eig,
            });
        }
        Ok(Self { mean, cov })
    }

    pub fn from_slices(mean: &[f64], cov_rows: &[&[f64]]) -> Result<Self> {
        let d = mean.len();
        let flat: Vec<f64> = cov_rows.iter().flat_map(|r| r.iter().copied()).collect();
        if flat.len() != d * d {
            return Err(Error::DimensionMismatch {
                expected: d * d,
                found: flat.len(),
            });
        }
        Self::new(DVector::from_column_slice(mean), DMatrix::from_row_slice(d, d, &flat))
    }

    pub fn standard(d: usize) -> Self {
        Self {
            mean: DVector::zeros(d),
            cov: DMatrix::identity(d, d),
        }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn cov(&self) -> &DMatrix<f64> {
        &self.cov
    }

    /// Moment-matched Gaussian of a discrete measure.
    pub fn moment_match(mu: &DiscreteMeasure) -> Self {
        Self {
            mean: mu.mean(),
            cov: linalg::symmetrize(&mu.covariance()),
        }
    }
}

/// Either kind of measure accepted by file loaders and samplers.
#[derive(Debug, Clone, PartialEq)]
pub enum Measure {
    Discrete(DiscreteMeasure),
    Gaussian(GaussianMeasure),
}

impl Measure {
    pub fn dim(&self) -> usize {
        match self {
            Measure::Discrete(m) => m.dim(),
            Measure::Gaussian(g) => g.dim(),
        }
    }
}

impl From<DiscreteMeasure> for Measure {
    fn from(m: DiscreteMeasure) -> Self {
        Measure::Discrete(m)
    }
}

impl From<GaussianMeasure> for Measure {
    fn from(g: GaussianMeasure) -> Self {
        Measure::Gaussian(g)
    }
}

/// Identifies an independent random stream: ChaCha20 keyed by `seed`, with
/// the cipher's stream counter set to `stream_id`.
///
/// Draws depend only on `(seed, stream_id)`, so replicas can be evaluated in
/// any order or in parallel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub struct RngStream {
    pub seed: u64,
    pub stream_id: u64,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        Self { seed, stream_id }
    }

    /// A fresh generator positioned at the start of this stream.
    pub fn rng(&self) -> ChaCha20Rng {
        let mut rng = ChaCha20Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream_id);
        rng
    }

    /// A child stream labelled by `tag`; distinct tags give distinct streams.
    pub fn derive(&self, tag: u64) -> Self {
        Self {
            seed: self.seed,
            stream_id: splitmix64(splitmix64(self.stream_id) ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15)),
        }
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Draws an `n`-point empirical measure (weights `1/n`).
pub fn sample(measure: &Measure, n: usize, stream: &RngStream) -> Result<DiscreteMeasure> {
    sample_with(measure, n, &mut stream.rng())
}

pub fn sample_with<R: Rng + ?Sized>(measure: &Measure, n: usize, rng: &mut R) -> Result<DiscreteMeasure> {
    if n == 0 {
        return Err(Error::InvalidArgument("sample size must be >= 1".into()));
    }
    match measure {
        Measure::Gaussian(g) => {
            let d = g.dim();
            let root = linalg::sqrtm(g.cov());
            let mut coords = Vec::with_capacity(n * d);
            let mut z = DVector::zeros(d);
            for _ in 0..n {
                for k in 0..d {
                    z[k] = rng.sample(StandardNormal);
                }
                let x = g.mean() + &root * &z;
                coords.extend(x.iter());
            }
            DiscreteMeasure::uniform_flat(d, coords)
        }
        Measure::Discrete(m) => {
            let mut cdf = Vec::with_capacity(m.len());
            let mut acc = 0.0;
            for w in m.weights() {
                acc += w;
                cdf.push(acc);
            }
            let d = m.dim();
            let mut coords = Vec::with_capacity(n * d);
            for _ in 0..n {
                let u: f64 = rng.random::<f64>() * acc;
                let idx = cdf.partition_point(|&c| c <= u).min(m.len() - 1);
                coords.extend_from_slice(m.point(idx));
            }
            DiscreteMeasure::uniform_flat(d, coords)
        }
    }
}

/// Uniform draws from `[0,1]^d`.
pub fn sample_unit_cube<R: Rng + ?Sized>(d: usize, n: usize, rng: &mut R) -> DiscreteMeasure {
    let coords: Vec<f64> = (0..n * d).map(|_| rng.random::<f64>()).collect();
    DiscreteMeasure::from_parts_unchecked(d, coords, vec![1.0 / n as f64; n])
}

/// Uniform draws from the unit Euclidean ball in `R^d`.
pub fn sample_unit_ball<R: Rng + ?Sized>(d: usize, n: usize, rng: &mut R) -> DiscreteMeasure {
    let mut coords = Vec::with_capacity(n * d);
    let mut z = vec![0.0; d];
    for _ in 0..n {
        let mut norm2 = 0.0f64;
        for zk in z.iter_mut() {
            *zk = rng.sample(StandardNormal);
            norm2 += *zk * *zk;
        }
        let r = rng.random::<f64>().powf(1.0 / d as f64) / norm2.sqrt();
        coords.extend(z.iter().map(|zk| zk * r));
    }
    DiscreteMeasure::from_parts_unchecked(d, coords, vec![1.0 / n as f64; n])
}

/// `||x - y||^p`.
#[inline]
pub fn pow_dist(x: &[f64], y: &[f64], p: f64) -> f64 {
    let sq: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
    if p == 2.0 {
        sq
    } else if p == 1.0 {
        sq.sqrt()
    } else {
        sq.sqrt().powf(p)
    }
}

pub(crate) fn check_exponent(p: f64) -> Result<()> {
    if !(p.is_finite() && p >= 1.0) {
        return Err(Error::InvalidArgument(format!("cost exponent must be >= 1, got {p}")));
    }
    Ok(())
}

pub(crate) fn check_same_dim(mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Result<()> {
    if mu.dim() != nu.dim() {
        return Err(Error::DimensionMismatch {
            expected: mu.dim(),
            found: nu.dim(),
        });
    }
    Ok(())
}

/// Ground cost `C_ij = ||x_i - y_j||^p`.
pub fn cost_matrix(mu: &DiscreteMeasure, nu: &DiscreteMeasure, p: f64) -> Result<DMatrix<f64>> {
    check_same_dim(mu, nu)?;
    check_exponent(p)?;
    Ok(DMatrix::from_fn(mu.len(), nu.len(), |i, j| pow_dist(mu.point(i), nu.point(j), p)))
}

/// Which schema a measure file follows.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeasureKind {
    Discrete,
    Gaussian,
}

#[derive(serde::Serialize, serde::Deserialize)]
struct DiscreteFile {
    points: Vec<Vec<f64>>,
    weights: Vec<f64>,
}

#[derive(serde::Serialize, serde::Deserialize)]
struct GaussianFile {
    mean: Vec<f64>,
    cov: Vec<Vec<f64>>,
}

pub fn parse_measure(text: &str, kind: MeasureKind) -> Result<Measure> {
    match kind {
        MeasureKind::Discrete => {
            let f: DiscreteFile = serde_json::from_str(text)?;
            if f.points.len() != f.weights.len() {
                return Err(Error::Invariant(format!(
                    "{} points but {} weights",
                    f.points.len(),
                    f.weights.len()
                )));
            }
            DiscreteMeasure::new(f.points, f.weights).map(Measure::Discrete)
        }
        MeasureKind::Gaussian => {
            let f: GaussianFile = serde_json::from_str(text)?;
            let d = f.mean.len();
            if f.cov.len() != d || f.cov.iter().any(|r| r.len() != d) {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    found: f.cov.len(),
                });
            }
            let flat: Vec<f64> = f.cov.into_iter().flatten().collect();
            GaussianMeasure::new(DVector::from_vec(f.mean), DMatrix::from_row_slice(d, d, &flat))
                .map(Measure::Gaussian)
        }
    }
}

pub fn load_measure(path: &std::path::Path, kind: MeasureKind) -> Result<Measure> {
    parse_measure(&std::fs::read_to_string(path)?, kind)
}

pub fn load_discrete(path: &std::path::Path) -> Result<DiscreteMeasure> {
    match load_measure(path, MeasureKind::Discrete)? {
        Measure::Discrete(m) => Ok(m),
        Measure::Gaussian(_) => unreachable!(),
    }
}

pub fn load_gaussian(path: &std::path::Path) -> Result<GaussianMeasure> {
    match load_measure(path, MeasureKind::Gaussian)? {
        Measure::Gaussian(g) => Ok(g),
        Measure::Discrete(_) => unreachable!(),
    }
}

/// The file-schema JSON value of a measure.
pub fn measure_to_json(measure: &Measure) -> serde_json::Value {
    match measure {
        Measure::Discrete(m) => serde_json::to_value(DiscreteFile {
            points: m.to_points(),
            weights: m.weights().to_vec(),
        }),
        Measure::Gaussian(g) => serde_json::to_value(GaussianFile {
            mean: g.mean().iter().copied().collect(),
            cov: (0..g.dim()).map(|i| g.cov().row(i).iter().copied().collect()).collect(),
        }),
    }
    .expect("plain numeric structs serialize")
}

pub fn save_measure(measure: &Measure, path: &std::path::Path) -> Result<()> {
    crate::json::write_file(path, &measure_to_json(measure))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weight_sum_violation_is_rejected() {
        let err = DiscreteMeasure::new(vec![vec![0.0]], vec![2.0]).unwrap_err();
        assert!(matches!(err, Error::Invariant(_)));
        let err = DiscreteMeasure::new(vec![vec![0.0], vec![1.0]], vec![1.5, -0.5]).unwrap_err();
        assert!(matches!(err, Error::Invariant(_)));
    }

    #[test]
    fn near_unit_weights_are_renormalized() {
        let m = DiscreteMeasure::new(vec![vec![0.0], vec![1.0]], vec![0.5, 0.5000004]).unwrap();
        assert!((m.weights().iter().sum::<f64>() - 1.0).abs() < WEIGHT_TOL);
    }

    #[test]
    fn ragged_points_are_rejected() {
        let err = DiscreteMeasure::uniform(vec![vec![0.0], vec![1.0, 2.0]]).unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch { .. }));
    }

    #[test]
    fn non_psd_covariance_is_rejected() {
        let err = GaussianMeasure::from_slices(&[0.0, 0.0], &[&[1.0, 2.0], &[2.0, 1.0]]).unwrap_err();
        assert!(matches!(err, Error::NonPsd { .. }));
    }

    #[test]
    fn point_mass_sampling() {
        let m = Measure::from(DiscreteMeasure::dirac(vec![0.0]).unwrap());
        let s = sample(&m, 5, &RngStream::new(3, 0)).unwrap();
        assert_eq!(s.len(), 5);
        assert!(s.coords().iter().all(|&x| x == 0.0));
        assert!(s.weights().iter().all(|&w| w == 0.2));
    }

    #[test]
    fn gaussian_sample_moments() {
        let g = Measure::from(GaussianMeasure::standard(1));
        let s = sample(&g, 100_000, &RngStream::new(7, 0)).unwrap();
        assert!(s.mean()[0].abs() < 0.02);
        assert!((s.covariance()[(0, 0)] - 1.0).abs() < 0.02);
    }

    #[test]
    fn discrete_sample_frequencies() {
        let m = Measure::from(DiscreteMeasure::uniform(vec![vec![0.0], vec![1.0]]).unwrap());
        let s = sample(&m, 100_000, &RngStream::new(7, 0)).unwrap();
        let ones = s.coords().iter().filter(|&&x| x == 1.0).count() as f64 / 1e5;
        assert!((ones - 0.5).abs() < 0.01);
    }

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let g = Measure::from(GaussianMeasure::standard(2));
        let a = sample(&g, 10, &RngStream::new(1, 4)).unwrap();
        let b = sample(&g, 10, &RngStream::new(1, 4)).unwrap();
        let c = sample(&g, 10, &RngStream::new(1, 5)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_ne!(RngStream::new(1, 4).derive(0), RngStream::new(1, 4).derive(1));
    }

    #[test]
    fn cost_matrix_examples() {
        let a = DiscreteMeasure::dirac(vec![0.0]).unwrap();
        let b = DiscreteMeasure::dirac(vec![1.0]).unwrap();
        assert_eq!(cost_matrix(&a, &b, 2.0).unwrap()[(0, 0)], 1.0);

        let u = DiscreteMeasure::uniform(vec![vec![0.0], vec![1.0]]).unwrap();
        let c = cost_matrix(&u, &u, 1.0).unwrap();
        assert_eq!(c, DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]));

        let o = DiscreteMeasure::dirac(vec![0.0, 0.0]).unwrap();
        let t = DiscreteMeasure::dirac(vec![3.0, 4.0]).unwrap();
        assert_eq!(cost_matrix(&o, &t, 2.0).unwrap()[(0, 0)], 25.0);

        assert!(matches!(cost_matrix(&a, &o, 2.0), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn file_examples() {
        let m = parse_measure(r#"{"points":[[0],[1]],"weights":[0.5,0.5]}"#, MeasureKind::Discrete).unwrap();
        assert_eq!(m.dim(), 1);
        let g = parse_measure(r#"{"mean":[0,0],"cov":[[1,0],[0,1]]}"#, MeasureKind::Gaussian).unwrap();
        assert_eq!(g, Measure::Gaussian(GaussianMeasure::standard(2)));
        let err = parse_measure(r#"{"points":[[0]],"weights":[2.0]}"#, MeasureKind::Discrete).unwrap_err();
        assert_eq!(err.kind(), "InvariantError");
        let err = parse_measure("{points", MeasureKind::Discrete).unwrap_err();
        assert_eq!(err.kind(), "ParseError");
    }

    #[test]
    fn save_load_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.json");
        let g = Measure::from(GaussianMeasure::standard(3));
        let m = sample(&g, 50, &RngStream::new(9, 1)).unwrap();
        let m = Measure::from(m);
        save_measure(&m, &path).unwrap();
        assert_eq!(load_measure(&path, MeasureKind::Discrete).unwrap(), m);
    }
}
