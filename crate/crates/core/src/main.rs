use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use oscillab::harness::{self, ExperimentId, ExperimentSpec, RunOptions, OUT_DIR_ENV};
use oscillab::Error;

/// Numerical experiments for the harmonic chain with random exchanges.
#[derive(Parser)]
#[command(name = "oscillab", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment spec (a TOML file or a builtin id such as E4).
    Run {
        spec: String,
        /// Output directory [default: spec `output`, then $OSCILLAB_OUT/<id>, then runs/<id>]
        #[arg(long)]
        out: Option<PathBuf>,
        /// Override the master seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads for replica ensembles (0 = all cores).
        #[arg(long, default_value_t = 0)]
        workers: usize,
        /// Validate and print the plan and projected cost without running.
        #[arg(long)]
        check: bool,
    },
    /// List the available experiments.
    ListExperiments,
    /// Validate a spec file without running it.
    Validate { spec: String },
}

const EXIT_FAILED_CHECKS: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_RUNTIME: u8 = 3;

fn load(arg: &str) -> Result<ExperimentSpec, Error> {
    if let Ok(id) = arg.parse::<ExperimentId>() {
        if !Path::new(arg).exists() {
            return Ok(ExperimentSpec::builtin(id));
        }
    }
    let text = std::fs::read_to_string(arg)?;
    ExperimentSpec::from_toml(&text).map_err(|e| match e {
        Error::Spec { path, reason } => Error::Spec {
            path: format!("{arg}: {path}"),
            reason,
        },
        other => other,
    })
}

fn is_usage(e: &Error) -> bool {
    matches!(
        e,
        Error::Spec { .. }
            | Error::Toml(_)
            | Error::Io(_)
            | Error::Budget { .. }
            | Error::InvalidParameter { .. }
            | Error::InvalidProfile { .. }
            | Error::StencilWrap { .. }
            | Error::NegativeRate { .. }
    )
}

fn fail(e: &Error) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(if is_usage(e) { EXIT_USAGE } else { EXIT_RUNTIME })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::ListExperiments => {
            for (id, title) in harness::list() {
                println!("{id:<4} {title}");
            }
            ExitCode::SUCCESS
        }
        Command::Validate { spec } => match load(&spec) {
            Ok(s) => {
                print!("{}", harness::plan(&s));
                println!("ok");
                ExitCode::SUCCESS
            }
            Err(e) => fail(&e),
        },
        Command::Run {
            spec,
            out,
            seed,
            workers,
            check,
        } => {
            let mut s = match load(&spec) {
                Ok(s) => s,
                Err(e) => return fail(&e),
            };
            if let Some(seed) = seed {
                s.seed = seed;
            }
            let dir = harness::output_dir(&s, out);
            if check {
                print!("{}", harness::plan(&s));
                println!("  output directory = {}", dir.display());
                return ExitCode::SUCCESS;
            }
            let report = match harness::run(&s, &RunOptions { seed, workers }) {
                Ok(r) => r,
                Err(e) => return fail(&e),
            };
            if let Err(e) = report.write(&dir) {
                return fail(&e);
            }
            print!("{}", report.render());
            println!("outputs in {} (default directory from ${OUT_DIR_ENV})", dir.display());
            if report.passed() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(EXIT_FAILED_CHECKS)
            }
        }
    }
}
