//! Batch experiment driver: JSON configs in, CSV reports out.
//!
//! `comonotone-mc run <config.json>` writes `<stem>.report.csv` (header
//! `name,mean,stderr,n,predicted,verdict`) and `<stem>.curves.csv`
//! (`parameter,value,stderr`) next to the working directory or under
//! `--out`. Exit codes make the suite usable as a CI gate:
//! 0 all verdicts consistent, 1 usage or config error, 2 at least one
//! statistical violation (the offending rows go to stderr).
//!
//! The same config and seed produce byte-identical reports regardless of
//! `--workers` / `COMONOTONE_WORKERS`.

mod config;
mod run;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("config {path}: {message}")]
    Config { path: String, message: String },
    #[error("{0}")]
    Invalid(String),
}

#[derive(Parser)]
#[command(
    name = "comonotone-mc",
    version,
    about = "Monte Carlo experiment driver for co-monotony, peacock and barrier-bound checks"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run one experiment config and write its CSV reports
    Run {
        /// Path to a JSON experiment config
        config: PathBuf,
        /// Override the config's n_paths / n_pairs
        #[arg(long)]
        paths: Option<usize>,
        /// Override the config's seed
        #[arg(long)]
        seed: Option<u64>,
        /// Directory for the report files (default: config's `out`, else `.`)
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads for the simulation pool (default: all cores)
        #[arg(long, env = "COMONOTONE_WORKERS")]
        workers: Option<usize>,
    },
    /// Print the registry of processes, functionals and test functions
    List,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return ExitCode::SUCCESS;
            }
            // the exit-code contract reserves 2 for statistical violations
            eprint!("{e}");
            return ExitCode::from(1);
        }
    };
    match cli.cmd {
        Cmd::List => {
            print!("{REGISTRY}");
            ExitCode::SUCCESS
        }
        Cmd::Run { config, paths, seed, out, workers } => {
            match run_command(&config, paths, seed, out, workers) {
                Ok(violations) if violations.is_empty() => ExitCode::SUCCESS,
                Ok(violations) => {
                    for v in &violations {
                        eprintln!("violation: {v}");
                    }
                    ExitCode::from(2)
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(1)
                }
            }
        }
    }
}

fn run_command(
    config_path: &Path,
    paths: Option<usize>,
    seed: Option<u64>,
    out: Option<PathBuf>,
    workers: Option<usize>,
) -> Result<Vec<String>, CliError> {
    if let Some(w) = workers {
        rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build_global()
            .map_err(|e| CliError::Invalid(format!("worker pool: {e}")))?;
    }
    let shown = config_path.display().to_string();
    let text = fs::read_to_string(config_path)
        .map_err(|e| CliError::Io { path: shown.clone(), source: e })?;
    // unknown keys are reported by name, with their JSON path and position
    let mut cfg = config::parse(&text)
        .map_err(|message| CliError::Config { path: shown.clone(), message })?;
    cfg.apply_overrides(paths, seed);

    let output = run::execute(&cfg)?;
    for w in &output.warnings {
        eprintln!("warning: {w}");
    }

    let out_dir = out
        .or_else(|| cfg.out_dir().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."));
    fs::create_dir_all(&out_dir)
        .map_err(|e| CliError::Io { path: out_dir.display().to_string(), source: e })?;
    let stem = config_path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("experiment");
    let report_path = out_dir.join(format!("{stem}.report.csv"));
    let curves_path = out_dir.join(format!("{stem}.curves.csv"));
    fs::write(&report_path, output.report_csv())
        .map_err(|e| CliError::Io { path: report_path.display().to_string(), source: e })?;
    fs::write(&curves_path, output.curves_csv())
        .map_err(|e| CliError::Io { path: curves_path.display().to_string(), source: e })?;
    println!("wrote {} ({} rows)", report_path.display(), output.rows.len());
    println!("wrote {} ({} points)", curves_path.display(), output.curves.len());

    Ok(output.violations().iter().map(|r| r.csv_line()).collect())
}

const REGISTRY: &str = "\
processes:
  brownian_motion
  brownian_bridge
  series_bm        { n_terms: int >= 1 }
  fbm              { hurst: H in (0, 1) }
  fbm_mvn          { hurst: H in (0, 1), tail_cutoff?: float, quad_steps?: int }
  liouville        { exponent: float >= 0 }                    kernel f(u) = u^exponent
  euler            { x0, drift_a, drift_b, vol_c, vol_d }      dX = (a + b X) dt + (c + d t) dW
  gbm              { s0 > 0, rate, sigma > 0 }
  pii              { drift_slope, variance_slope >= 0, poisson?, fixed_jumps? }
  exp_pii          { s0 > 0, pii, martingale: bool }
  gaussian_vector  { rows: symmetric positive-semidefinite matrix }

functionals (declared monotonicity):
  terminal         nondecreasing
  value_at         { t >= 0 }                                  nondecreasing
  running_max      nondecreasing
  running_min      nondecreasing
  call             { strike > 0 }                              nondecreasing
  down_indicator   { level, eps > 0 }                          nonincreasing
  up_indicator     { level, eps > 0 }                          nondecreasing
  integral         { measure }                                 nondecreasing
  compose          { map: neg | exp | square, inner }          neg flips, square forgets

measures:
  lebesgue         { scale > 0 }
  exp_weighted     { rate, scale > 0 }
  dirac            { t >= 0, weight?: default 1 }

convex test functions:
  call_part        { strike }
  abs_dev          { center }
  square
  soft_plus        { strike, eps > 0 }

jump laws:
  constant { value } | normal { mean, std } | exponential { rate }

barrier kinds:
  down-and-in, down-and-out, up-and-in, up-and-out
";
