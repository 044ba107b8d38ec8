//! Experiment harness: declarative specs, replica ensembles, outputs.
//!
//! ```no_run
//! use oscillab::harness::{self, ExperimentId, ExperimentSpec, RunOptions};
//! let spec = ExperimentSpec::builtin(ExperimentId::E4);
//! let report = harness::run(&spec, &RunOptions::default()).unwrap();
//! report.write(std::path::Path::new("out/e4")).unwrap();
//! ```

pub mod ensemble;
mod experiments;
pub mod report;
pub mod spec;

use std::path::PathBuf;
use std::time::Instant;

pub use ensemble::{ensemble, ensemble_outcome, EnsembleConfig, EnsembleOutcome};
pub use report::{Check, Manifest, RunReport, Summary, Table};
pub use spec::{ExperimentId, ExperimentSpec, InitialSpec, ParamSpec};

use crate::error::Result;

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "OSCILLAB_OUT";

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct RunOptions {
    /// Overrides the master seed of the experiment file.
    pub seed: Option<u64>,
    /// Worker threads for ensembles; 0 uses all cores.
    pub workers: usize,
}

/// Validates and runs one experiment. Nothing is written to disk.
pub fn run(spec: &ExperimentSpec, opts: &RunOptions) -> Result<RunReport> {
    let mut spec = spec.clone();
    if let Some(seed) = opts.seed {
        spec.seed = seed;
    }
    spec.validate()?;
    let start = Instant::now();
    let outcome = experiments::dispatch(&spec, opts.workers)?;
    let wall = start.elapsed().as_secs_f64();
    let passed = outcome.checks.iter().all(|c| c.passed);
    let mut outputs: Vec<String> = outcome.tables.iter().map(|t| format!("{}.csv", t.name)).collect();
    outputs.extend(["summary.json".to_owned(), "manifest.json".to_owned()]);
    Ok(RunReport {
        summary: Summary {
            experiment: spec.experiment,
            title: spec.experiment.title().to_owned(),
            passed,
            checks: outcome.checks,
            metrics: outcome.metrics,
            warnings: outcome.warnings,
        },
        manifest: Manifest {
            experiment: spec.experiment,
            version: env!("CARGO_PKG_VERSION").to_owned(),
            seed: spec.seed,
            workers: opts.workers,
            spec,
            outputs,
            wall_time_s: wall,
        },
        tables: outcome.tables,
    })
}

/// Output directory: explicit choice, then the experiment file, then `$OSCILLAB_OUT/<id>`,
/// then `runs/<id>`.
#[must_use]
pub fn output_dir(spec: &ExperimentSpec, explicit: Option<PathBuf>) -> PathBuf {
    let id = spec.experiment.to_string().to_lowercase();
    explicit
        .or_else(|| spec.output.clone())
        .or_else(|| std::env::var_os(OUT_DIR_ENV).map(|d| PathBuf::from(d).join(&id)))
        .unwrap_or_else(|| PathBuf::from("runs").join(id))
}

/// Dry-run description: what would be run and at what cost.
#[must_use]
pub fn plan(spec: &ExperimentSpec) -> String {
    let mut s = format!("{}: {}\n", spec.experiment, spec.experiment.title());
    s += &format!(
        "  N = {:?}, alpha = {}, kappa = {:?}, horizon = {}\n",
        spec.params.n, spec.params.alpha, spec.params.kappa, spec.horizon
    );
    if spec.experiment.is_monte_carlo() {
        s += &format!("  replicas = {}, seed = {}\n", spec.replicas, spec.seed);
    }
    s += &format!(
        "  projected swap events = {:.3e} (budget {:.3e})\n",
        spec.projected_events(),
        spec.budget
    );
    s
}

/// `(id, title)` of every experiment.
#[must_use]
pub fn list() -> Vec<(ExperimentId, &'static str)> {
    ExperimentId::ALL.iter().map(|&id| (id, id.title())).collect()
}
