//! Batch execution of CLI jobs listed in a JSON manifest.
//!
//! The manifest is either a bare list of jobs or `{"seed": s, "jobs": [...]}`.
//! A job is `{"name": ..., "args": ["exact", "--mu", ...], "stdout": path}`;
//! `name` and `stdout` are optional. The global seed is passed as `--seed` to
//! every seeded job that does not set its own.

use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::Deserialize;
use serde_json::{json, Value};

use super::{with_path, SEEDED};
use crate::error::{Error, Result};
use crate::{json, VERSION};

#[derive(Deserialize)]
#[serde(untagged)]
enum Manifest {
    Jobs(Vec<Job>),
    Full { seed: Option<u64>, jobs: Vec<Job> },
}

#[derive(Deserialize, Clone)]
#[serde(deny_unknown_fields)]
struct Job {
    name: Option<String>,
    args: Vec<String>,
    stdout: Option<String>,
}

struct Outcome {
    code: i32,
    stderr: String,
}

fn execute(job: &Job, seed: Option<u64>) -> Outcome {
    let mut args = job.args.clone();
    if args.first().map(String::as_str) == Some("run-manifest") {
        return Outcome {
            code: 2,
            stderr: "manifests cannot nest".into(),
        };
    }
    let seeded = args.first().is_some_and(|c| SEEDED.contains(&c.as_str()));
    if let (Some(seed), true) = (seed, seeded) {
        if !args.iter().any(|a| a == "--seed" || a.starts_with("--seed=")) {
            args.push("--seed".into());
            args.push(seed.to_string());
        }
    }
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let code = super::run(std::iter::once("otkit".to_string()).chain(args), &mut out, &mut err);
    if let Some(path) = &job.stdout {
        if let Err(e) = std::fs::write(path, &out) {
            return Outcome {
                code: 2,
                stderr: format!("{path}: {e}"),
            };
        }
    }
    Outcome {
        code,
        stderr: String::from_utf8_lossy(&err).into_owned(),
    }
}

/// Runs every job (in parallel), then writes the index to `index` or `out`.
/// Returns 0 if every job succeeded and 1 otherwise.
pub fn run_manifest(manifest: &Path, index: Option<&Path>, out: &mut dyn Write) -> Result<i32> {
    let text = with_path(manifest, std::fs::read_to_string(manifest).map_err(Error::from))?;
    let parsed: Manifest = with_path(manifest, serde_json::from_str(&text).map_err(Error::from))?;
    let (seed, jobs) = match parsed {
        Manifest::Jobs(jobs) => (None, jobs),
        Manifest::Full { seed, jobs } => (seed, jobs),
    };
    let outcomes: Vec<Outcome> = jobs.par_iter().map(|job| execute(job, seed)).collect();
    let failed = outcomes.iter().filter(|o| o.code != 0).count();
    let records: Vec<Value> = jobs
        .iter()
        .zip(&outcomes)
        .enumerate()
        .map(|(i, (job, o))| {
            json!({
                "name": job.name.clone().unwrap_or_else(|| format!("job{i}")),
                "args": job.args,
                "stdout": job.stdout,
                "exit_code": o.code,
                "error": (o.code != 0).then(|| o.stderr.trim().to_string()),
            })
        })
        .collect();
    let body = json!({ "version": VERSION, "seed": seed, "jobs": records, "failed": failed });
    match index {
        Some(path) => with_path(path, json::write_file(path, &body))?,
        None => {
            out.write_all(&json::to_vec(&body)?)?;
            out.write_all(b"\n")?;
        }
    }
    Ok(if failed == 0 { 0 } else { 1 })
}
