//! `mnclab`: runs measure, axiom, Wallman and fixed-point experiments from a
//! TOML config and writes JSON, CSV and SVG outputs.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod output;
pub mod svg;

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};

pub use commands::{Outcome, Report, MEASURE_HEADER};
pub use config::RunConfig;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("computation failed: {0}")]
    Compute(#[from] mnc_core::Error),
    #[error("output error: {0}")]
    Output(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Compute(_) | CliError::Output(_) => 3,
        }
    }
}

/// Exit code when every computation ran but a checked property failed.
pub const EXIT_CHECK_FAILED: i32 = 4;

/// Used when no `--config` is given.
pub const DEFAULT_CONFIG: &str = "[domain]\nlower = 0.0\nupper = 1.0\nstep = 0.001\n";

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
    Both,
}

#[derive(Debug, Parser)]
#[command(name = "mnclab", version, about = "Measures of noncompactness on sampled function families")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// TOML run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    /// RNG seed; overrides the config seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[arg(long, global = true, value_enum, default_value = "both")]
    pub format: Format,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Ω, its parts and the classical brackets for each `[[family]]`.
    Measure,
    /// Randomized and fixed checks of the measure axioms.
    Axioms,
    /// Ultrafilters on finite discrete spaces.
    Wallman,
    /// Fixed points and set iterations for each `[[operator]]`.
    Darbo,
    /// Every section present in the config.
    Report,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Measure => "measure",
            Command::Axioms => "axioms",
            Command::Wallman => "wallman",
            Command::Darbo => "darbo",
            Command::Report => "report",
        }
    }
}

pub fn load_config(path: Option<&Path>) -> Result<RunConfig, CliError> {
    match path {
        Some(p) => RunConfig::load(p),
        None => RunConfig::from_toml(DEFAULT_CONFIG),
    }
}

pub fn execute(command: Command, config: &RunConfig, seed: u64) -> Result<Outcome, CliError> {
    match command {
        Command::Measure => commands::cmd_measure(config, seed),
        Command::Axioms => commands::cmd_axioms(config, seed),
        Command::Wallman => commands::cmd_wallman(config, seed),
        Command::Darbo => commands::cmd_darbo(config, seed),
        Command::Report => commands::cmd_report(config, seed),
    }
}

fn json_bytes(v: &impl serde::Serialize) -> Result<Vec<u8>, CliError> {
    let mut s = serde_json::to_string_pretty(v).map_err(|e| CliError::Output(format!("json: {e}")))?;
    s.push('\n');
    Ok(s.into_bytes())
}

pub fn write_outcome(outcome: &Outcome, dir: &Path, format: Format) -> Result<(), CliError> {
    if format != Format::Csv {
        output::write_atomic(&dir.join("report.json"), &json_bytes(&outcome.report)?)?;
    }
    if format != Format::Json {
        for (name, text) in &outcome.csv {
            output::write_atomic(&dir.join(name), text.as_bytes())?;
        }
    }
    for (name, text) in &outcome.svg {
        output::write_atomic(&dir.join(name), text.as_bytes())?;
    }
    output::write_atomic(&dir.join("timings.json"), &json_bytes(&outcome.timings)?)
}

/// Parses arguments, runs, writes outputs and returns the process exit code.
pub fn run(cli: Cli) -> i32 {
    match run_inner(&cli) {
        Ok(outcome) => {
            for line in &outcome.summary {
                println!("{line}");
            }
            if outcome.report.passed {
                0
            } else {
                for f in &outcome.report.failures {
                    eprintln!("FAILED: {f}");
                }
                EXIT_CHECK_FAILED
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn run_inner(cli: &Cli) -> Result<Outcome, CliError> {
    let config = load_config(cli.config.as_deref())?;
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Config("--threads must be at least 1".into()));
        }
        // a second call in the same process fails harmlessly
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let seed = cli.seed.or(config.seed).unwrap_or(0);
    let outcome = execute(cli.command, &config, seed)?;
    debug_assert_eq!(outcome.report.command, cli.command.name());
    write_outcome(&outcome, &cli.out, cli.format)?;
    Ok(outcome)
}
