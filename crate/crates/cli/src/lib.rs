//! Command-line harness: `ldirac <certify|trace|compare|symbols> --config FILE`.
//!
//! Exit codes: 0 when every check passes, 1 when a check fails or a computation
//! errors, 2 for invalid input (bad config, bad initial data, I/O).

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod output;
pub mod scenario;

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use rayon::prelude::*;

use crate::commands::{execute, Command, RunContext};
use crate::config::{Format, ScenarioConfig};
use crate::output::Meta;
use crate::scenario::Scenario;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),
    #[error("invalid input: {0}")]
    Invalid(lorentz_dirac::Error),
    #[error("{0}")]
    Library(#[from] lorentz_dirac::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Library(_) => 1,
            _ => 2,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "ldirac", version, about = "Certify, trace and compare polarization transport on Lorentzian metrics")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Sub,

    /// Scenario file, or a directory whose `*.toml` files run as a batch.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Overrides `sampling.seed` and the seed of a bare `random_null`.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,

    /// Output directory; defaults to `outputs.path`.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    /// Worker threads for batch runs.
    #[arg(long, global = true, default_value_t = 1)]
    pub jobs: usize,

    /// Omit the timestamped `meta` block so that outputs are byte-reproducible.
    #[arg(long, global = true)]
    pub no_meta: bool,

    #[arg(long, global = true, hide = true)]
    pub flip_subprincipal: bool,
}

#[derive(Debug, Clone, Copy, Subcommand)]
pub enum Sub {
    /// Module axioms and principal-type certificates at sampled points.
    Certify,
    /// Null bicharacteristic from the seed point.
    Trace,
    /// Denker transport against the spin-connection pullback along one ray.
    Compare,
    /// Principal, subprincipal and factorization symbols at the seed point.
    Symbols,
}

impl From<Sub> for Command {
    fn from(s: Sub) -> Self {
        match s {
            Sub::Certify => Command::Certify,
            Sub::Trace => Command::Trace,
            Sub::Compare => Command::Compare,
            Sub::Symbols => Command::Symbols,
        }
    }
}

/// Parses `args` (including the program name) and runs; returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run_cli(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn run_cli(cli: &Cli) -> Result<i32, CliError> {
    let path = cli
        .config
        .as_deref()
        .ok_or_else(|| CliError::Config("--config is required".into()))?;
    if cli.jobs == 0 {
        return Err(CliError::Config("--jobs must be at least 1".into()));
    }
    if !path.is_dir() {
        return run_one(cli, path, None);
    }
    let mut files: Vec<PathBuf> = std::fs::read_dir(path)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "toml"))
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(CliError::Config(format!("no *.toml scenarios in {}", path.display())));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.jobs)
        .build()
        .map_err(|e| CliError::Config(e.to_string()))?;
    let codes: Vec<i32> = pool.install(|| {
        files
            .par_iter()
            .map(|f| {
                let stem = f.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
                match run_one(cli, f, Some(&stem)) {
                    Ok(code) => code,
                    Err(e) => {
                        eprintln!("error: {}: {e}", f.display());
                        e.exit_code()
                    }
                }
            })
            .collect()
    });
    Ok(codes.into_iter().max().unwrap_or(0))
}

fn run_one(cli: &Cli, path: &Path, batch_stem: Option<&str>) -> Result<i32, CliError> {
    let mut config = ScenarioConfig::load(path)?;
    if let Some(f) = cli.format {
        config.outputs.format = f;
    }
    if let Some(s) = cli.seed {
        config.sampling.seed = s;
    }
    let mut out = cli.out.clone().unwrap_or_else(|| config.outputs.path.clone());
    if let Some(stem) = batch_stem {
        out = out.join(stem);
    }
    let cmd = Command::from(cli.command);
    let scenario = Scenario::resolve(config, cli.seed, cmd.needs())?;
    let ctx = RunContext {
        scenario: &scenario,
        out: &out,
        meta: Meta {
            enabled: !cli.no_meta,
            config: &scenario.config,
        },
        flip_subprincipal: cli.flip_subprincipal,
    };
    let pass = execute(cmd, &ctx)?;
    if !pass {
        eprintln!("{}: checks failed (see {})", path.display(), out.display());
    }
    Ok(if pass { 0 } else { 1 })
}
