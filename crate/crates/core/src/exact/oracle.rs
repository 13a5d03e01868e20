use crate::error::{Error, Result};
use crate::measures::{check_exponent, check_same_dim, pow_dist, DiscreteMeasure};

/// Largest size accepted by [`brute_force_ot`].
pub const BRUTE_FORCE_MAX: usize = 8;

/// Minimum of `(1/n) sum_i C_{i, sigma(i)}` over all permutations. For uniform
/// weights and `n = m` the optimum is attained at a permutation matrix, so this
/// is the exact transport cost.
pub fn brute_force_ot(mu: &DiscreteMeasure, nu: &DiscreteMeasure, p: f64) -> Result<f64> {
    check_same_dim(mu, nu)?;
    check_exponent(p)?;
    let n = mu.len();
    if n != nu.len() || n > BRUTE_FORCE_MAX || !mu.is_uniform() || !nu.is_uniform() {
        return Err(Error::UnsupportedInstance(format!(
            "brute force needs uniform weights and n = m <= {BRUTE_FORCE_MAX}"
        )));
    }
    let c: Vec<f64> = mu
        .points()
        .flat_map(|x| nu.points().map(move |y| pow_dist(x, y, p)))
        .collect();
    let mut perm: Vec<usize> = (0..n).collect();
    let mut best = f64::INFINITY;
    permute(&mut perm, 0, &c, n, &mut best);
    Ok(best / n as f64)
}

fn permute(perm: &mut [usize], k: usize, c: &[f64], n: usize, best: &mut f64) {
    if k == n {
        let total: f64 = perm.iter().enumerate().map(|(i, &j)| c[i * n + j]).sum();
        if total < *best {
            *best = total;
        }
        return;
    }
    for t in k..n {
        perm.swap(k, t);
        permute(perm, k + 1, c, n, best);
        perm.swap(k, t);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_cases() {
        let a = DiscreteMeasure::dirac(vec![1.0]).unwrap();
        let b = DiscreteMeasure::dirac(vec![3.5]).unwrap();
        assert_eq!(brute_force_ot(&a, &b, 1.0).unwrap(), 2.5);

        let mu = DiscreteMeasure::uniform(vec![vec![0.0], vec![1.0]]).unwrap();
        let nu = DiscreteMeasure::uniform(vec![vec![0.5], vec![2.0]]).unwrap();
        assert_eq!(brute_force_ot(&mu, &nu, 1.0).unwrap(), 0.75);
    }

    #[test]
    fn rejects_non_uniform() {
        let mu = DiscreteMeasure::new(vec![vec![0.0], vec![1.0]], vec![0.3, 0.7]).unwrap();
        assert!(matches!(brute_force_ot(&mu, &mu, 2.0), Err(Error::UnsupportedInstance(_))));
    }
}
