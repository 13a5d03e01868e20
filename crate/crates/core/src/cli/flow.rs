//! `otkit flow`: JSON flow configs and trajectory output.
//!
//! A config carries `dt` (alias `h`), `T`, an optional `seed` and
//! `record_every`, plus the fields of its flow kind:
//!
//! - `langevin`: `potential`, `init`
//! - `svgd`: `potential`, `init`, `kernel`
//! - `wgf`, `wfr`: `potential` and/or `interaction`, `entropy` (must be 0), `init`
//! - `npmle`: `data`, `n_particles` or `init`, `mode` (`wfr` or `wgf`)
//! - `bwvi`: `potential`, `gaussian`, `quadrature` or `mc_draws`
//! - `gmix`: `potential`, `components`, `weights`, `mode` (`fixed` or `wfr`), `quadrature` or `mc_draws`
//! - `attention`: `init`, `Q`, `K`, `V` (identity when absent), `variant`
//!
//! Measures are either inline `{"points": ..., "weights": ...}` objects
//! (weights optional, uniform by default) or paths to measure files.

use std::fmt::Write as _;
use std::path::Path;

use clap::ValueEnum;
use nalgebra::{DMatrix, DVector};
use serde::Deserialize;
use serde_json::{json, Value};

use super::{with_path, DEFAULT_SEED};
use crate::error::{Error, Result};
use crate::flows::{
    attention_flow, bw_vi_flow, energy, gaussian_mixture_flow, langevin_step, npmle_flow, npmle_flow_from,
    npmle_objective, svgd_step, trajectory_csv_steps, wfr_step, wgf_step, AttentionVariant, Expectation,
    FunctionalSpec, GaussianParticleEnsemble, Interaction, MixtureWeights, NpmleMode, ParticleEnsemble, Potential,
    EIG_FLOOR, MAX_HALVINGS, WEIGHT_SUM_TOL,
};
use crate::json::fmt_g17;
use crate::measures::load_discrete;
use crate::surrogate::Kernel;
use crate::{DiscreteMeasure, GaussianMeasure, RngStream};

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub(super) enum FlowKind {
    Langevin,
    Svgd,
    Wgf,
    Wfr,
    Npmle,
    Bwvi,
    Gmix,
    Attention,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct FlowConfig {
    #[serde(alias = "h")]
    dt: f64,
    #[serde(rename = "T", alias = "t_end")]
    t_end: f64,
    seed: Option<u64>,
    #[serde(default = "one")]
    record_every: usize,
    potential: Option<PotentialSpec>,
    interaction: Option<InteractionSpec>,
    #[serde(default)]
    entropy: f64,
    init: Option<MeasureSpec>,
    kernel: Option<KernelSpec>,
    data: Option<MeasureSpec>,
    n_particles: Option<usize>,
    mode: Option<String>,
    gaussian: Option<GaussianSpec>,
    components: Option<Vec<GaussianSpec>>,
    weights: Option<Vec<f64>>,
    quadrature: Option<usize>,
    mc_draws: Option<usize>,
    #[serde(rename = "Q")]
    q: Option<Vec<Vec<f64>>>,
    #[serde(rename = "K")]
    k: Option<Vec<Vec<f64>>>,
    #[serde(rename = "V")]
    v: Option<Vec<Vec<f64>>>,
    variant: Option<String>,
}

fn one() -> usize {
    1
}

#[derive(Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
enum PotentialSpec {
    Zero,
    Quadratic,
    Quartic,
    Bimodal { shift: f64 },
    Gaussian { mean: Vec<f64>, cov: Vec<Vec<f64>> },
}

#[derive(Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
enum InteractionSpec {
    Quadratic,
    GaussianWell { scale: f64 },
}

#[derive(Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
enum KernelSpec {
    Gaussian { sigma: f64 },
    Laplace { scale: f64 },
}

#[derive(Deserialize)]
#[serde(untagged)]
enum MeasureSpec {
    Path(String),
    Inline {
        points: Vec<Vec<f64>>,
        weights: Option<Vec<f64>>,
    },
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct GaussianSpec {
    mean: Vec<f64>,
    cov: Vec<Vec<f64>>,
}

fn missing(field: &str, kind: FlowKind) -> Error {
    Error::InvalidArgument(format!("{kind:?} flow config needs `{field}`").to_lowercase())
}

fn matrix(rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let n = rows.len();
    let m = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != m) {
        return Err(Error::InvalidArgument("ragged matrix rows".into()));
    }
    let flat: Vec<f64> = rows.iter().flatten().copied().collect();
    Ok(DMatrix::from_row_slice(n, m, &flat))
}

impl GaussianSpec {
    fn build(&self) -> Result<GaussianMeasure> {
        let cov = matrix(&self.cov)?;
        GaussianMeasure::new(DVector::from_vec(self.mean.clone()), cov)
    }
}

impl PotentialSpec {
    fn build(&self) -> Result<Potential> {
        Ok(match self {
            PotentialSpec::Zero => Potential::zero(),
            PotentialSpec::Quadratic => Potential::quadratic(),
            PotentialSpec::Quartic => Potential::quartic(),
            PotentialSpec::Bimodal { shift } => Potential::bimodal(*shift),
            PotentialSpec::Gaussian { mean, cov } => Potential::gaussian(
                &GaussianSpec {
                    mean: mean.clone(),
                    cov: cov.clone(),
                }
                .build()?,
            )?,
        })
    }
}

impl InteractionSpec {
    fn build(&self) -> Interaction {
        match self {
            InteractionSpec::Quadratic => Interaction::quadratic(),
            InteractionSpec::GaussianWell { scale } => Interaction::gaussian_well(*scale),
        }
    }
}

impl MeasureSpec {
    fn build(&self) -> Result<DiscreteMeasure> {
        match self {
            MeasureSpec::Path(p) => {
                let path = Path::new(p);
                with_path(path, load_discrete(path))
            }
            MeasureSpec::Inline { points, weights: None } => DiscreteMeasure::uniform(points.clone()),
            MeasureSpec::Inline {
                points,
                weights: Some(w),
            } => DiscreteMeasure::new(points.clone(), w.clone()),
        }
    }

    fn ensemble(&self) -> Result<ParticleEnsemble> {
        Ok(ParticleEnsemble::from_measure(&self.build()?))
    }
}

fn steps(dt: f64, t_end: f64) -> Result<usize> {
    if !(dt > 0.0 && dt.is_finite()) || !(t_end >= 0.0 && t_end.is_finite()) {
        return Err(Error::InvalidArgument(format!("need dt > 0 and T >= 0, got dt = {dt}, T = {t_end}")));
    }
    Ok((t_end / dt).round() as usize)
}

/// Keeps every `every`-th frame and the last one.
fn recorded<T>(frames: Vec<T>, every: usize) -> Vec<(usize, T)> {
    let last = frames.len().saturating_sub(1);
    frames
        .into_iter()
        .enumerate()
        .filter(|(i, _)| i % every == 0 || *i == last)
        .collect()
}

/// Steps a particle flow `steps` times, keeping recorded frames only.
fn integrate(
    init: ParticleEnsemble,
    steps: usize,
    every: usize,
    mut step: impl FnMut(&ParticleEnsemble) -> Result<ParticleEnsemble>,
) -> Result<Vec<(usize, ParticleEnsemble)>> {
    let mut frames = vec![(0, init.clone())];
    let mut state = init;
    for s in 1..=steps {
        state = step(&state)?;
        if s % every == 0 || s == steps {
            frames.push((s, state.clone()));
        }
    }
    Ok(frames)
}

fn moments(ens: &ParticleEnsemble) -> Value {
    let d = ens.dim();
    let mut mean = vec![0.0; d];
    for (x, w) in ens.positions.iter().zip(&ens.weights) {
        for k in 0..d {
            mean[k] += w * x[k];
        }
    }
    let mut var = vec![0.0; d];
    for (x, w) in ens.positions.iter().zip(&ens.weights) {
        for k in 0..d {
            var[k] += w * (x[k] - mean[k]) * (x[k] - mean[k]);
        }
    }
    json!({ "final_mean": mean, "final_variance": var })
}

/// CSV of Gaussian states: `step,time,particle_id,m0..,s00..,weight` with the
/// covariance flattened row by row.
fn gaussian_csv(frames: &[(usize, f64, Vec<GaussianMeasure>, Vec<f64>)]) -> String {
    let d = frames.first().and_then(|f| f.2.first()).map_or(0, GaussianMeasure::dim);
    let mut out = String::from("step,time,particle_id");
    for k in 0..d {
        let _ = write!(out, ",m{k}");
    }
    for i in 0..d {
        for j in 0..d {
            let _ = write!(out, ",s{i}{j}");
        }
    }
    out.push_str(",weight\n");
    for (step, time, comps, weights) in frames {
        for (id, (g, w)) in comps.iter().zip(weights).enumerate() {
            let _ = write!(out, "{step},{},{id}", fmt_g17(*time));
            for v in g.mean().iter() {
                let _ = write!(out, ",{}", fmt_g17(*v));
            }
            for i in 0..d {
                for j in 0..d {
                    let _ = write!(out, ",{}", fmt_g17(g.cov()[(i, j)]));
                }
            }
            let _ = writeln!(out, ",{}", fmt_g17(*w));
        }
    }
    out
}

fn expectation(cfg: &FlowConfig, dim: usize, stream: &RngStream) -> Expectation {
    match (cfg.quadrature, cfg.mc_draws) {
        (Some(order), _) => Expectation::Quadrature { order },
        (None, Some(draws)) => Expectation::MonteCarlo {
            draws,
            stream: stream.clone(),
        },
        (None, None) => Expectation::auto(dim, stream),
    }
}

fn gaussian_measure_json(g: &GaussianMeasure) -> Value {
    crate::measures::measure_to_json(&crate::Measure::Gaussian(g.clone()))
}

/// Runs the flow described by `config`, writes the trajectory to `out` and
/// returns the seed used, the tolerances and a summary.
pub(super) fn run(kind: FlowKind, config: &Path, out: &Path, seed: Option<u64>) -> Result<(u64, Value, Value)> {
    let text = with_path(config, std::fs::read_to_string(config).map_err(Error::from))?;
    let cfg: FlowConfig = with_path(config, serde_json::from_str(&text).map_err(Error::from))?;
    let seed = seed.or(cfg.seed).unwrap_or(DEFAULT_SEED);
    let stream = RngStream::new(seed, 0);
    let n_steps = steps(cfg.dt, cfg.t_end)?;
    let every = cfg.record_every.max(1);
    let potential = || -> Result<Potential> { cfg.potential.as_ref().ok_or_else(|| missing("potential", kind))?.build() };
    let init = || -> Result<ParticleEnsemble> { cfg.init.as_ref().ok_or_else(|| missing("init", kind))?.ensemble() };
    let tolerances = json!({ "weight_sum": WEIGHT_SUM_TOL, "eig_floor": EIG_FLOOR, "max_halvings": MAX_HALVINGS });

    let (csv, mut summary) = match kind {
        FlowKind::Langevin => {
            let v = potential()?;
            let mut rng = stream.rng();
            let frames = integrate(init()?, n_steps, every, |e| langevin_step(e, &v, cfg.dt, &mut rng))?;
            let summary = moments(&frames.last().expect("initial frame").1);
            (trajectory_csv_steps(frames.iter().map(|(s, f)| (*s, f))), summary)
        }
        FlowKind::Svgd => {
            let v = potential()?;
            let kernel = match cfg.kernel.as_ref().ok_or_else(|| missing("kernel", kind))? {
                KernelSpec::Gaussian { sigma } => Kernel::Gaussian { sigma: *sigma },
                KernelSpec::Laplace { scale } => Kernel::Laplace { scale: *scale },
            };
            let frames = integrate(init()?, n_steps, every, |e| svgd_step(e, &v, kernel, cfg.dt))?;
            let summary = moments(&frames.last().expect("initial frame").1);
            (trajectory_csv_steps(frames.iter().map(|(s, f)| (*s, f))), summary)
        }
        FlowKind::Wgf | FlowKind::Wfr => {
            let spec = FunctionalSpec {
                potential: cfg.potential.as_ref().map(PotentialSpec::build).transpose()?,
                interaction: cfg.interaction.as_ref().map(InteractionSpec::build),
                entropy: cfg.entropy,
            };
            let start = init()?;
            spec.validate(start.dim(), &stream.derive(1))?;
            if spec.entropy > 0.0 {
                return Err(Error::EntropyNotSupported);
            }
            let frames = if kind == FlowKind::Wgf {
                integrate(start, n_steps, every, |e| wgf_step(e, &spec, cfg.dt))?
            } else {
                let first_variation = |e: &ParticleEnsemble, x: &[f64]| -> f64 {
                    let mut total = spec.potential.as_ref().map_or(0.0, |v| v.value(x));
                    if let Some(w) = &spec.interaction {
                        for (y, wy) in e.positions.iter().zip(&e.weights) {
                            let z: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).collect();
                            total += wy * w.value(&z);
                        }
                    }
                    total
                };
                let gradient = |e: &ParticleEnsemble, x: &[f64]| -> Vec<f64> {
                    let mut g = spec.potential.as_ref().map_or(vec![0.0; x.len()], |v| v.gradient(x));
                    if let Some(w) = &spec.interaction {
                        for (y, wy) in e.positions.iter().zip(&e.weights) {
                            let z: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).collect();
                            for (gk, dk) in g.iter_mut().zip(w.gradient(&z)) {
                                *gk += wy * dk;
                            }
                        }
                    }
                    g
                };
                integrate(start, n_steps, every, |e| wfr_step(e, first_variation, gradient, cfg.dt))?
            };
            let last = &frames.last().expect("initial frame").1;
            let mut summary = moments(last);
            summary["final_energy"] = energy(last, &spec).into();
            summary["final_time"] = last.time.into();
            (trajectory_csv_steps(frames.iter().map(|(s, f)| (*s, f))), summary)
        }
        FlowKind::Npmle => {
            let data = cfg.data.as_ref().ok_or_else(|| missing("data", kind))?.build()?;
            let mode = match cfg.mode.as_deref() {
                None | Some("wfr") => NpmleMode::Wfr,
                Some("wgf") => NpmleMode::Wgf,
                Some(other) => return Err(Error::InvalidArgument(format!("unknown npmle mode {other:?}"))),
            };
            let run = match (&cfg.init, cfg.n_particles) {
                (Some(m), _) => npmle_flow_from(&data, m.ensemble()?, cfg.dt, cfg.t_end, mode)?,
                (None, Some(n)) => npmle_flow(&data, n, cfg.dt, cfg.t_end, &stream, mode)?,
                (None, None) => return Err(missing("n_particles", kind)),
            };
            let last = run.trajectory.last().expect("initial frame");
            let summary = json!({
                "objective": run.log_likelihood,
                "final_objective": npmle_objective(&data, last),
                "final_time": last.time,
                "final_positions": last.positions,
                "final_weights": last.weights,
            });
            let frames = recorded(run.trajectory, every);
            (trajectory_csv_steps(frames.iter().map(|(s, f)| (*s, f))), summary)
        }
        FlowKind::Bwvi => {
            let v = potential()?;
            let start = cfg.gaussian.as_ref().ok_or_else(|| missing("gaussian", kind))?.build()?;
            let exp = expectation(&cfg, start.dim(), &stream);
            let run = bw_vi_flow(&v, &start, cfg.dt, cfg.t_end, &exp)?;
            let last = run.states.last().expect("initial state").clone();
            let summary = json!({
                "kl_up_to_constant": run.kl.last(),
                "final": gaussian_measure_json(&last),
                "clamped_steps": run.clamped_steps,
            });
            let frames: Vec<_> = run
                .times
                .into_iter()
                .zip(run.states)
                .map(|(t, g)| (t, vec![g], vec![1.0]))
                .collect();
            let frames: Vec<_> = recorded(frames, every).into_iter().map(|(s, (t, g, w))| (s, t, g, w)).collect();
            (gaussian_csv(&frames), summary)
        }
        FlowKind::Gmix => {
            let v = potential()?;
            let comps = cfg
                .components
                .as_ref()
                .ok_or_else(|| missing("components", kind))?
                .iter()
                .map(GaussianSpec::build)
                .collect::<Result<Vec<_>>>()?;
            let start = match &cfg.weights {
                Some(w) => GaussianParticleEnsemble::new(comps, w.clone())?,
                None => GaussianParticleEnsemble::uniform(comps)?,
            };
            let mode = match cfg.mode.as_deref() {
                None | Some("fixed") => MixtureWeights::Fixed,
                Some("wfr") => MixtureWeights::Wfr,
                Some(other) => return Err(Error::InvalidArgument(format!("unknown gmix mode {other:?}"))),
            };
            let exp = expectation(&cfg, start.dim(), &stream);
            let run = gaussian_mixture_flow(&v, &start, cfg.dt, cfg.t_end, &exp, mode)?;
            let last = run.states.last().expect("initial state");
            let summary = json!({
                "final_components": last.components.iter().map(gaussian_measure_json).collect::<Vec<_>>(),
                "final_weights": last.weights,
                "final_time": last.time,
                "clamped_steps": run.clamped_steps,
            });
            let frames: Vec<_> = recorded(run.states, every)
                .into_iter()
                .map(|(s, e)| (s, e.time, e.components, e.weights))
                .collect();
            (gaussian_csv(&frames), summary)
        }
        FlowKind::Attention => {
            let tokens = init()?;
            let d = tokens.dim();
            let mat = |m: &Option<Vec<Vec<f64>>>| -> Result<DMatrix<f64>> {
                m.as_deref().map_or(Ok(DMatrix::identity(d, d)), matrix)
            };
            let variant = match cfg.variant.as_deref() {
                None | Some("softmax") => AttentionVariant::Softmax,
                Some("unnormalized") => AttentionVariant::Unnormalized,
                Some("sphere") => AttentionVariant::Sphere,
                Some(other) => return Err(Error::InvalidArgument(format!("unknown attention variant {other:?}"))),
            };
            let frames = attention_flow(&tokens, &mat(&cfg.q)?, &mat(&cfg.k)?, &mat(&cfg.v)?, cfg.dt, cfg.t_end, variant)?;
            let last = frames.last().expect("initial frame");
            let summary = json!({ "final_positions": last.positions, "final_time": last.time });
            let frames = recorded(frames, every);
            (trajectory_csv_steps(frames.iter().map(|(s, f)| (*s, f))), summary)
        }
    };
    with_path(out, std::fs::write(out, csv).map_err(Error::from))?;
    summary["flow"] = format!("{kind:?}").to_lowercase().into();
    summary["steps"] = n_steps.into();
    summary["dt"] = cfg.dt.into();
    summary["T"] = cfg.t_end.into();
    summary["record_every"] = every.into();
    Ok((seed, tolerances, summary))
}
