//! The `otkit` command line: argument parsing, dispatch and output conventions.
//!
//! Successful commands print one JSON object on stdout carrying the library
//! version, the seed and the tolerances used, and exit 0. Usage errors exit 2
//! with a message on stderr. Numerical failures exit 1 and print
//! `{"error": kind, "message": ...}` on stdout.

mod flow;
mod manifest;

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Map, Value};

use crate::barycenter::{barycenter_1d, free_support_barycenter};
use crate::bench::{rate_experiment, RateStatistic, Sampler};
use crate::bounds::{
    dyadic_upper_bound, fourier_coefficients, fourier_upper_bound_grid, lipschitz_lower_bound, Reference,
};
use crate::entropic::{entropic_map, schrodinger_residual, sinkhorn, sinkhorn_divergence, SinkhornParams};
use crate::error::{Error, Result};
use crate::exact::{check_cyclical_monotonicity, tv_distance, ExactSolver, PivotRule};
use crate::gaussian::{
    gaussian_barycenter, gaussian_brenier_map, gaussian_w2_squared, BARYCENTER_RESIDUAL_TOL, BARYCENTER_STEP_TOL,
};
use crate::measures::{load_discrete, load_gaussian, measure_to_json, DiscreteMeasure, GaussianMeasure, INPUT_WEIGHT_TOL};
use crate::plan::TOL_MARG;
use crate::surrogate::{mmd, sliced_wasserstein, smoothed_w1, Kernel, NoiseMode};
use crate::univariate::{monotone_map, w1_via_cdf, wp_via_quantiles};
use crate::{json, Measure, RngStream, VERSION};

pub use manifest::run_manifest;

#[derive(Parser, Debug)]
#[command(name = "otkit", version, about = "Optimal transport toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct Pair {
    /// Source measure (JSON with `points` and `weights`).
    #[arg(long)]
    mu: PathBuf,
    /// Target measure.
    #[arg(long)]
    nu: PathBuf,
}

#[derive(Args, Debug, Clone)]
struct Inputs {
    /// Input measure files.
    #[arg(long, num_args = 1.., required = true)]
    inputs: Vec<PathBuf>,
    /// Barycentric weights; uniform when omitted.
    #[arg(long, num_args = 1..)]
    weights: Option<Vec<f64>>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Exact discrete optimal transport by network simplex.
    Exact {
        #[command(flatten)]
        pair: Pair,
        #[arg(long, default_value_t = 2.0)]
        p: f64,
        /// Write the optimal plan to this file.
        #[arg(long)]
        emit_plan: Option<PathBuf>,
        /// Check cyclical monotonicity of the plan's support.
        #[arg(long)]
        check_cm: bool,
        /// Longest cycle examined by --check-cm.
        #[arg(long, default_value_t = 3)]
        cm_cycle: usize,
        #[arg(long, value_enum, default_value_t = Pivot::First)]
        pivot: Pivot,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Optimal transport on the line through quantile functions.
    Ot1d {
        #[command(flatten)]
        pair: Pair,
        #[arg(long, default_value_t = 1.0)]
        p: f64,
        /// Write the monotone map to this file.
        #[arg(long)]
        emit_map: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Closed-form Gaussian transport.
    Gauss {
        #[arg(value_enum)]
        op: GaussOp,
        #[command(flatten)]
        inputs: Inputs,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Entropic optimal transport (quadratic cost).
    Sinkhorn {
        #[command(flatten)]
        pair: Pair,
        #[arg(long, default_value_t = 0.1)]
        eps: f64,
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
        #[arg(long, default_value_t = 100_000)]
        max_iter: usize,
        /// Write the dual potentials to this file.
        #[arg(long)]
        emit_duals: Option<PathBuf>,
        /// Report the entropic map at the source atoms.
        #[arg(long)]
        map: bool,
        /// Report the debiased Sinkhorn divergence.
        #[arg(long)]
        divergence: bool,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Surrogate divergences.
    Dist {
        #[arg(value_enum)]
        kind: DistKind,
        #[command(flatten)]
        pair: Pair,
        /// Kernel bandwidth (mmd) or noise level (smoothed).
        #[arg(long, default_value_t = 1.0)]
        sigma: f64,
        #[arg(long, value_enum, default_value_t = KernelKind::Gaussian)]
        kernel: KernelKind,
        #[arg(long, default_value_t = 1.0)]
        p: f64,
        #[arg(long, default_value_t = 100)]
        n_dirs: usize,
        #[arg(long, default_value_t = 10)]
        n_noise: usize,
        /// Give copy k of atom i the same noise in both measures.
        #[arg(long)]
        shared_noise: bool,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Certified bounds on W1 for measures on the unit cube.
    Bound {
        #[arg(value_enum)]
        kind: BoundKind,
        #[command(flatten)]
        pair: Pair,
        #[arg(long, default_value_t = 6)]
        depth: u32,
        /// Frequency truncation radius.
        #[arg(long = "M", default_value_t = 8.0)]
        m: f64,
        /// Smoothing levels tried by the Fourier bound; the smallest bound wins.
        #[arg(long, num_args = 1.., default_values_t = [0.001, 0.003, 0.01, 0.03, 0.1])]
        eps: Vec<f64>,
        #[arg(long, default_value_t = 10_000)]
        n_mc: usize,
        /// Reference law of the lower bound: nu itself or the unit cube.
        #[arg(long, value_enum, default_value_t = ReferenceKind::Law)]
        reference: ReferenceKind,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Particle and Gaussian gradient flows driven by a JSON config.
    Flow {
        #[arg(value_enum)]
        kind: flow::FlowKind,
        #[arg(long)]
        config: PathBuf,
        /// Trajectory CSV.
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Wasserstein barycenters.
    Barycenter {
        #[arg(value_enum)]
        kind: BaryKind,
        #[command(flatten)]
        inputs: Inputs,
        /// Initial support for the free-support iteration (uniform weights).
        #[arg(long)]
        init: Option<PathBuf>,
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
        #[arg(long, default_value_t = 100)]
        max_iter: usize,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Statistical rate experiments.
    Bench {
        #[command(subcommand)]
        what: BenchCommand,
    },
    /// Run a JSON manifest of jobs.
    RunManifest {
        manifest: PathBuf,
        /// Write the job index here instead of stdout.
        #[arg(long)]
        index: Option<PathBuf>,
    },
}

#[derive(Subcommand, Debug)]
enum BenchCommand {
    Rates {
        #[arg(long, value_enum)]
        stat: StatKind,
        #[arg(long, value_enum, default_value_t = DistFamily::UniformCube)]
        dist: DistFamily,
        #[arg(long, default_value_t = 3)]
        d: usize,
        /// `start:end:xF` geometric grid, `start:end:+S` arithmetic grid or a comma list.
        #[arg(long, default_value = "64:4096:x2")]
        n: String,
        #[arg(long, default_value_t = 20)]
        reps: usize,
        #[arg(long)]
        seed: Option<u64>,
        /// Raw records CSV.
        #[arg(long)]
        out: PathBuf,
        /// Also write the fit summary JSON here.
        #[arg(long)]
        summary: Option<PathBuf>,
        #[arg(long, default_value_t = 1.0)]
        sigma: f64,
        #[arg(long, default_value_t = 200)]
        n_dirs: usize,
        #[arg(long, default_value_t = 1)]
        n_noise: usize,
    },
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
enum Pivot {
    First,
    Block,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
enum GaussOp {
    W2,
    Map,
    Bary,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
enum DistKind {
    Mmd,
    Sliced,
    Smoothed,
    Tv,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
enum KernelKind {
    Gaussian,
    Laplace,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
enum BoundKind {
    Dyadic,
    Fourier,
    Lower,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
enum ReferenceKind {
    Law,
    Cube,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
enum BaryKind {
    #[value(name = "1d")]
    OneD,
    Free,
    Gauss,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
enum StatKind {
    W1,
    Mmd,
    Sliced,
    Smoothed,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
enum DistFamily {
    UniformCube,
    UniformBall,
    Gaussian,
}

pub const DEFAULT_SEED: u64 = 0;

/// Subcommands that take `--seed`; the manifest runner injects its global
/// seed into these when a job does not set one.
pub(crate) const SEEDED: &[&str] = &["exact", "ot1d", "gauss", "sinkhorn", "dist", "bound", "flow", "barycenter", "bench"];

/// Runs the command line `args` (program name first) and returns the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let text = e.render().to_string();
            if code == 0 {
                let _ = write!(out, "{text}");
            } else {
                let _ = write!(err, "{text}");
            }
            return code;
        }
    };
    if let Command::RunManifest { manifest, index } = &cli.command {
        return match run_manifest(manifest, index.as_deref(), out) {
            Ok(code) => code,
            Err(e) => report_error(&e, out, err),
        };
    }
    match dispatch(cli.command) {
        Ok(value) => match json::to_vec(&value) {
            Ok(bytes) => {
                let _ = out.write_all(&bytes);
                let _ = out.write_all(b"\n");
                0
            }
            Err(e) => report_error(&e, out, err),
        },
        Err(e) => report_error(&e, out, err),
    }
}

fn is_usage(e: &Error) -> bool {
    matches!(e, Error::InvalidArgument(_) | Error::Parse(_) | Error::Io(_) | Error::BadBandwidth(_))
}

fn report_error(e: &Error, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let _ = writeln!(err, "error: {e}");
    if is_usage(e) {
        return 2;
    }
    let body = json!({ "error": e.kind(), "message": e.to_string(), "version": VERSION });
    if let Ok(bytes) = json::to_vec(&body) {
        let _ = out.write_all(&bytes);
        let _ = out.write_all(b"\n");
    }
    1
}

/// Adds the version, seed and tolerance fields to a result object.
fn envelope(command: &str, seed: u64, tolerances: Value, body: Value) -> Value {
    let mut map = Map::new();
    map.insert("command".into(), command.into());
    map.insert("version".into(), VERSION.into());
    map.insert("seed".into(), seed.into());
    map.insert("tolerances".into(), tolerances);
    if let Value::Object(fields) = body {
        map.extend(fields);
    }
    Value::Object(map)
}

fn with_path<T>(path: &Path, r: Result<T>) -> Result<T> {
    r.map_err(|e| match e {
        Error::Io(io) => Error::InvalidArgument(format!("{}: {io}", path.display())),
        Error::Parse(msg) => Error::Parse(format!("{}: {msg}", path.display())),
        other => other,
    })
}

fn discrete(path: &Path) -> Result<DiscreteMeasure> {
    with_path(path, load_discrete(path))
}

fn gaussian(path: &Path) -> Result<GaussianMeasure> {
    with_path(path, load_gaussian(path))
}

fn write_json(path: &Path, value: &Value) -> Result<()> {
    with_path(path, json::write_file(path, value))
}

fn weights_or_uniform(weights: Option<Vec<f64>>, k: usize) -> Result<Vec<f64>> {
    match weights {
        Some(w) if w.len() != k => Err(Error::InvalidArgument(format!("{} weights for {k} inputs", w.len()))),
        Some(w) => Ok(w),
        None => Ok(vec![1.0 / k as f64; k]),
    }
}

fn dispatch(command: Command) -> Result<Value> {
    match command {
        Command::Exact {
            pair,
            p,
            emit_plan,
            check_cm,
            cm_cycle,
            pivot,
            seed,
        } => {
            let (mu, nu) = (discrete(&pair.mu)?, discrete(&pair.nu)?);
            let solver = ExactSolver {
                pivot: match pivot {
                    Pivot::First => PivotRule::FirstEligible,
                    Pivot::Block => PivotRule::BlockSearch,
                },
                ..ExactSolver::default()
            };
            let plan = solver.solve(&mu, &nu, p)?;
            let mut body = json!({
                "cost": plan.cost,
                "wasserstein": plan.cost.powf(1.0 / p),
                "p": p,
                "n": mu.len(),
                "m": nu.len(),
                "marginal_residual": plan.marginal_residual(),
                "dual_value": plan.dual_value(),
            });
            if check_cm {
                let report = check_cyclical_monotonicity(&plan, &mu, &nu, cm_cycle);
                body["cyclically_monotone"] = report.holds.into();
                body["violating_cycle"] = json!(report.violating_cycle);
            }
            if let Some(path) = emit_plan {
                write_json(&path, &plan.to_json())?;
            }
            let tol = json!({ "marginal": TOL_MARG, "input_weights": INPUT_WEIGHT_TOL });
            Ok(envelope("exact", seed.unwrap_or(DEFAULT_SEED), tol, body))
        }
        Command::Ot1d { pair, p, emit_map, seed } => {
            let (mu, nu) = (discrete(&pair.mu)?, discrete(&pair.nu)?);
            let cost = wp_via_quantiles(&mu, &nu, p)?;
            let mut body = json!({ "cost": cost, "wasserstein": cost.powf(1.0 / p), "p": p });
            if p == 1.0 {
                body["w1_cdf"] = w1_via_cdf(&mu, &nu)?.into();
            }
            if let Some(path) = emit_map {
                let map = monotone_map(&mu, &nu)?;
                write_json(&path, &json!({ "source": map.source, "target": map.target }))?;
            }
            Ok(envelope("ot1d", seed.unwrap_or(DEFAULT_SEED), json!({ "input_weights": INPUT_WEIGHT_TOL }), body))
        }
        Command::Gauss { op, inputs, seed } => {
            let gs: Vec<GaussianMeasure> = inputs.inputs.iter().map(|p| gaussian(p)).collect::<Result<_>>()?;
            let two = || -> Result<(&GaussianMeasure, &GaussianMeasure)> {
                match gs.as_slice() {
                    [a, b] => Ok((a, b)),
                    _ => Err(Error::InvalidArgument(format!("need exactly 2 inputs, got {}", gs.len()))),
                }
            };
            let body = match op {
                GaussOp::W2 => {
                    let (a, b) = two()?;
                    let sq = gaussian_w2_squared(a, b)?;
                    json!({ "w2": sq.sqrt(), "w2_squared": sq })
                }
                GaussOp::Map => {
                    let (a, b) = two()?;
                    json!({ "map": gaussian_brenier_map(a, b)?.to_json() })
                }
                GaussOp::Bary => gauss_bary(&gs, inputs.weights)?,
            };
            let tol = json!({ "step": BARYCENTER_STEP_TOL, "residual": BARYCENTER_RESIDUAL_TOL });
            Ok(envelope("gauss", seed.unwrap_or(DEFAULT_SEED), tol, body))
        }
        Command::Sinkhorn {
            pair,
            eps,
            tol,
            max_iter,
            emit_duals,
            map,
            divergence,
            seed,
        } => {
            let (mu, nu) = (discrete(&pair.mu)?, discrete(&pair.nu)?);
            let params = SinkhornParams { eps, tol, max_iter };
            let result = sinkhorn(&mu, &nu, params)?.ensure_converged()?;
            let mut body = result.to_json();
            let obj = body.as_object_mut().expect("object");
            let duals = json!({ "f": obj.remove("dual_f"), "g": obj.remove("dual_g"), "eps": eps });
            body["schrodinger_residual"] = schrodinger_residual(&result, &mu, &nu).into();
            if map {
                body["entropic_map"] = json!(entropic_map(&result, &mu, &nu));
            }
            if divergence {
                body["divergence"] = sinkhorn_divergence(&mu, &nu, params)?.into();
            }
            if let Some(path) = emit_duals {
                write_json(&path, &duals)?;
            }
            let tols = json!({ "tol": tol, "max_iter": max_iter });
            Ok(envelope("sinkhorn", seed.unwrap_or(DEFAULT_SEED), tols, body))
        }
        Command::Dist {
            kind,
            pair,
            sigma,
            kernel,
            p,
            n_dirs,
            n_noise,
            shared_noise,
            seed,
        } => {
            let (mu, nu) = (discrete(&pair.mu)?, discrete(&pair.nu)?);
            let seed = seed.unwrap_or(DEFAULT_SEED);
            let stream = RngStream::new(seed, 0);
            let body = match kind {
                DistKind::Mmd => {
                    let k = match kernel {
                        KernelKind::Gaussian => Kernel::Gaussian { sigma },
                        KernelKind::Laplace => Kernel::Laplace { scale: sigma },
                    };
                    json!({ "statistic": "mmd", "value": mmd(&mu, &nu, k)?, "sigma": sigma })
                }
                DistKind::Sliced => {
                    let est = sliced_wasserstein(&mu, &nu, p, n_dirs, &stream)?;
                    let mut v = est.to_json();
                    v["statistic"] = "sliced".into();
                    v["p"] = p.into();
                    v["n_dirs"] = n_dirs.into();
                    v
                }
                DistKind::Smoothed => {
                    let mode = if shared_noise { NoiseMode::Shared } else { NoiseMode::Independent };
                    let value = smoothed_w1(&mu, &nu, sigma, n_noise, &stream, mode, &ExactSolver::default())?;
                    json!({ "statistic": "smoothed", "value": value, "sigma": sigma, "n_noise": n_noise })
                }
                DistKind::Tv => json!({ "statistic": "tv", "value": tv_distance(&mu, &nu) }),
            };
            Ok(envelope("dist", seed, json!({ "input_weights": INPUT_WEIGHT_TOL }), body))
        }
        Command::Bound {
            kind,
            pair,
            depth,
            m,
            eps,
            n_mc,
            reference,
            seed,
        } => {
            let (mu, nu) = (discrete(&pair.mu)?, discrete(&pair.nu)?);
            let seed = seed.unwrap_or(DEFAULT_SEED);
            let body = match kind {
                BoundKind::Dyadic => json!({ "bound": dyadic_upper_bound(&mu, &nu, depth)?, "depth": depth }),
                BoundKind::Fourier => {
                    let (a, b) = (fourier_coefficients(&mu, m)?, fourier_coefficients(&nu, m)?);
                    let (grid, best) = fourier_upper_bound_grid(&a, &b, &eps)?;
                    json!({
                        "bound": grid[best].value,
                        "best": grid[best].to_json(),
                        "grid": grid.iter().map(|b| b.to_json()).collect::<Vec<_>>(),
                        "M": m,
                    })
                }
                BoundKind::Lower => {
                    let reference = match reference {
                        ReferenceKind::Law => Reference::Law(Measure::Discrete(nu)),
                        ReferenceKind::Cube => Reference::UnitCube { dim: mu.dim() },
                    };
                    let lb = lipschitz_lower_bound(&mu, &reference, n_mc, &RngStream::new(seed, 0))?;
                    let mut v = lb.to_json();
                    v["bound"] = lb.estimate.into();
                    v["n_mc"] = n_mc.into();
                    v
                }
            };
            Ok(envelope("bound", seed, json!({ "input_weights": INPUT_WEIGHT_TOL }), body))
        }
        Command::Flow { kind, config, out, seed } => {
            let (seed, tolerances, body) = flow::run(kind, &config, &out, seed)?;
            Ok(envelope("flow", seed, tolerances, body))
        }
        Command::Barycenter {
            kind,
            inputs,
            init,
            tol,
            max_iter,
            seed,
        } => {
            let seed = seed.unwrap_or(DEFAULT_SEED);
            let (tols, body) = match kind {
                BaryKind::Gauss => {
                    let gs: Vec<GaussianMeasure> = inputs.inputs.iter().map(|p| gaussian(p)).collect::<Result<_>>()?;
                    let tols = json!({ "step": BARYCENTER_STEP_TOL, "residual": BARYCENTER_RESIDUAL_TOL });
                    (tols, gauss_bary(&gs, inputs.weights)?)
                }
                BaryKind::OneD => {
                    let ms: Vec<DiscreteMeasure> = inputs.inputs.iter().map(|p| discrete(p)).collect::<Result<_>>()?;
                    let w = weights_or_uniform(inputs.weights, ms.len())?;
                    let bary = barycenter_1d(&ms, &w)?;
                    let f = crate::barycenter::barycenter_functional_1d(&bary.quantile, &ms, &w)?;
                    let body = json!({
                        "barycenter": measure_to_json(&Measure::Discrete(bary.measure)),
                        "functional": f,
                    });
                    (json!({ "input_weights": INPUT_WEIGHT_TOL }), body)
                }
                BaryKind::Free => {
                    let ms: Vec<DiscreteMeasure> = inputs.inputs.iter().map(|p| discrete(p)).collect::<Result<_>>()?;
                    let w = weights_or_uniform(inputs.weights, ms.len())?;
                    let start = match init {
                        Some(path) => discrete(&path)?,
                        None => DiscreteMeasure::uniform(ms[0].to_points())?,
                    };
                    let bary = free_support_barycenter(&ms, &w, &start, max_iter, tol, &ExactSolver::default())?;
                    (json!({ "tol": tol, "max_iter": max_iter }), bary.to_json())
                }
            };
            Ok(envelope("barycenter", seed, tols, body))
        }
        Command::Bench {
            what:
                BenchCommand::Rates {
                    stat,
                    dist,
                    d,
                    n,
                    reps,
                    seed,
                    out,
                    summary,
                    sigma,
                    n_dirs,
                    n_noise,
                },
        } => {
            let seed = seed.unwrap_or(DEFAULT_SEED);
            let grid = parse_grid(&n)?;
            if d == 0 {
                return Err(Error::InvalidArgument("--d must be >= 1".into()));
            }
            let statistic = match stat {
                StatKind::W1 => RateStatistic::W1Empirical,
                StatKind::Mmd => RateStatistic::Mmd { sigma },
                StatKind::Sliced => RateStatistic::SlicedW1 { directions: n_dirs },
                StatKind::Smoothed => RateStatistic::SmoothedW1 { sigma, n_noise },
            };
            let sampler = match dist {
                DistFamily::UniformCube => Sampler::UnitCube(d),
                DistFamily::UniformBall => Sampler::UnitBall(d),
                DistFamily::Gaussian => Sampler::Gaussian(GaussianMeasure::standard(d)),
            };
            let table = rate_experiment(statistic, &sampler, &grid, reps, seed)?;
            with_path(&out, std::fs::write(&out, table.csv()).map_err(Error::from))?;
            let report = table.summary();
            if let Some(path) = summary {
                write_json(&path, &report)?;
            }
            let tols = json!({ "solver_cap": crate::bench::BENCH_CAP });
            Ok(envelope("bench", seed, tols, report))
        }
        Command::RunManifest { .. } => unreachable!("handled before dispatch"),
    }
}

fn gauss_bary(gs: &[GaussianMeasure], weights: Option<Vec<f64>>) -> Result<Value> {
    let w = weights_or_uniform(weights, gs.len())?;
    let bary = gaussian_barycenter(gs, &w)?;
    Ok(json!({
        "barycenter": measure_to_json(&Measure::Gaussian(bary.measure)),
        "iterations": bary.iterations,
        "residual": bary.residual,
        "functional": bary.functional.last(),
    }))
}

/// Parses `start:end:xF`, `start:end:+S` or `a,b,c` into sample sizes.
fn parse_grid(spec: &str) -> Result<Vec<usize>> {
    let bad = || Error::InvalidArgument(format!("bad sample-size grid {spec:?}"));
    let num = |s: &str| s.trim().parse::<usize>().map_err(|_| bad());
    if !spec.contains(':') {
        return spec.split(',').map(num).collect();
    }
    let parts: Vec<&str> = spec.split(':').collect();
    let [start, end, step] = parts.as_slice() else {
        return Err(bad());
    };
    let (start, end) = (num(start)?, num(end)?);
    if start == 0 || end < start {
        return Err(bad());
    }
    let mut grid = vec![start];
    if let Some(f) = step.strip_prefix('x') {
        let f = num(f)?;
        if f < 2 {
            return Err(bad());
        }
        while let Some(next) = grid.last().unwrap().checked_mul(f).filter(|n| *n <= end) {
            grid.push(next);
        }
    } else {
        let s = num(step.strip_prefix('+').unwrap_or(step))?;
        if s == 0 {
            return Err(bad());
        }
        while let Some(next) = Some(grid.last().unwrap() + s).filter(|n| *n <= end) {
            grid.push(next);
        }
    }
    Ok(grid)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grids() {
        assert_eq!(parse_grid("64:4096:x2").unwrap(), vec![64, 128, 256, 512, 1024, 2048, 4096]);
        assert_eq!(parse_grid("10:30:+10").unwrap(), vec![10, 20, 30]);
        assert_eq!(parse_grid("5,7, 9").unwrap(), vec![5, 7, 9]);
        assert!(parse_grid("64:32:x2").is_err());
        assert!(parse_grid("64:128:x1").is_err());
    }

    #[test]
    fn clap_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }

    #[test]
    fn usage_errors_exit_two() {
        let (mut out, mut err) = (Vec::new(), Vec::new());
        assert_eq!(run(["otkit", "exact", "--bogus"], &mut out, &mut err), 2);
        assert!(out.is_empty());
        assert!(!err.is_empty());
    }
}
