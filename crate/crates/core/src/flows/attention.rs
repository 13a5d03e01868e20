//! Self-attention dynamics of tokens under fixed query, key and value matrices.

use nalgebra::{DMatrix, DVector};

use super::particles::per_particle;
use super::ParticleEnsemble;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AttentionVariant {
    /// `x_i' = V sum_j x_j e^{<Q x_i, K x_j>} / sum_j e^{<Q x_i, K x_j>}`.
    #[default]
    Softmax,
    /// `x_i' = V sum_j w_j x_j e^{<Q x_i, K x_j>}`, integrated against the token measure.
    Unnormalized,
    /// Unnormalized field projected on the tangent space of the sphere, tokens
    /// renormalized after every step.
    Sphere,
}

const NORM_TOL: f64 = 1e-9;

/// Euler integration for `round(T / dt)` steps; returns every state.
pub fn attention_flow(
    tokens: &ParticleEnsemble,
    q: &DMatrix<f64>,
    k: &DMatrix<f64>,
    v: &DMatrix<f64>,
    dt: f64,
    t_end: f64,
    variant: AttentionVariant,
) -> Result<Vec<ParticleEnsemble>> {
    let d = tokens.dim();
    for m in [q, k, v] {
        if m.nrows() != d || m.ncols() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: m.nrows().max(m.ncols()),
            });
        }
    }
    if !(dt > 0.0 && dt.is_finite()) || !(t_end >= 0.0 && t_end.is_finite()) {
        return Err(Error::InvalidArgument(format!("need dt > 0 and T >= 0, got dt = {dt}, T = {t_end}")));
    }
    if variant == AttentionVariant::Sphere {
        for x in &tokens.positions {
            let norm = x.iter().map(|a| a * a).sum::<f64>().sqrt();
            if (norm - 1.0).abs() > NORM_TOL {
                return Err(Error::InvalidArgument(format!("sphere variant needs unit tokens, found norm {norm}")));
            }
        }
    }
    let steps = (t_end / dt).round() as usize;
    let mut state = tokens.clone();
    let mut frames = Vec::with_capacity(steps + 1);
    frames.push(state.clone());
    for step in 1..=steps {
        let xs: Vec<DVector<f64>> = state.positions.iter().map(|x| DVector::from_column_slice(x)).collect();
        let keys: Vec<DVector<f64>> = xs.iter().map(|x| k * x).collect();
        let positions = per_particle(xs.len(), |i| {
            let query = q * &xs[i];
            let scores: Vec<f64> = keys.iter().map(|kx| query.dot(kx)).collect();
            let mut field = DVector::zeros(d);
            match variant {
                AttentionVariant::Softmax => {
                    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                    let mut total = 0.0;
                    for (x, s) in xs.iter().zip(&scores) {
                        let e = (s - max).exp();
                        field += x * e;
                        total += e;
                    }
                    field /= total;
                }
                AttentionVariant::Unnormalized | AttentionVariant::Sphere => {
                    for ((x, s), w) in xs.iter().zip(&scores).zip(&state.weights) {
                        field += x * (w * s.exp());
                    }
                }
            }
            let mut vel = v * field;
            if variant == AttentionVariant::Sphere {
                let radial = vel.dot(&xs[i]);
                vel -= &xs[i] * radial;
            }
            let mut next = &xs[i] + vel * dt;
            if variant == AttentionVariant::Sphere {
                next /= next.norm();
            }
            next.iter().copied().collect::<Vec<f64>>()
        });
        state = ParticleEnsemble {
            positions,
            weights: state.weights.clone(),
            time: step as f64 * dt,
        };
        frames.push(state.clone());
    }
    Ok(frames)
}
