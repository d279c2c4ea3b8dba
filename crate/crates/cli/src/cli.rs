//! Argument parsing and subcommand dispatch.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::PathBuf;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand, ValueEnum};
use harvestdiff_core::analysis::{AnalysisError, LinearizationPoint};
use harvestdiff_core::coeff::Species;
use thiserror::Error;

use crate::config::{load_config, ConfigError};
use crate::presets::{preset, PresetError};
use crate::runner::{eigen_at, format_sweep, regime_report, run, sweep, RunError};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "harvestdiff", version, about = "Harvested two-species competition-diffusion solver")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum StateArg {
    Trivial,
    UStar,
    VStar,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SpeciesArg {
    U,
    V,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate a configuration and write its outputs.
    Run {
        #[arg(long)]
        config: PathBuf,
    },
    /// Print or save one of the built-in experiment configurations.
    Preset {
        #[arg(long)]
        name: String,
        #[arg(long)]
        variant: Option<String>,
        /// Write the JSON here instead of standard output.
        #[arg(long)]
        emit: Option<PathBuf>,
    },
    /// Predict (and optionally observe) the long-time regime.
    Regime {
        #[arg(long)]
        mu: f64,
        #[arg(long)]
        nu: f64,
        /// Stationary configuration used to compute the thresholds.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Also run the configuration and report the observed outcome.
        #[arg(long, requires = "config")]
        simulate: bool,
    },
    /// Principal eigenvalue of a linearization.
    Eig {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_enum)]
        state: StateArg,
        /// Species whose growth is measured at the trivial state.
        #[arg(long, value_enum, default_value = "u")]
        species: SpeciesArg,
    },
    /// Run a grid of harvesting pairs and summarize each outcome.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_delimiter = ',', required = true)]
        mu: Vec<f64>,
        #[arg(long, value_delimiter = ',', required = true)]
        nu: Vec<f64>,
        /// Summary CSV path; standard output when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Preset(#[from] PresetError),
    #[error(transparent)]
    Run(#[from] RunError),
    #[error("cannot write {path}: {source}")]
    Write { path: PathBuf, source: std::io::Error },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Preset(_) => EXIT_USAGE,
            CliError::Config(_) | CliError::Write { .. } => EXIT_CONFIG,
            CliError::Run(e) => match e {
                RunError::Config(_) | RunError::Initial(_) | RunError::Output { .. } => EXIT_CONFIG,
                RunError::Analysis(AnalysisError::TimeDependent) => EXIT_CONFIG,
                RunError::Simulation(_) | RunError::Analysis(_) => EXIT_NUMERICAL,
            },
        }
    }
}

fn write_file(path: &PathBuf, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|source| CliError::Write {
        path: path.clone(),
        source,
    })
}

/// Executes one parsed command, printing results to `out`.
pub fn execute(command: Command, out: &mut dyn Write) -> Result<(), CliError> {
    let mut say = |text: String| {
        let _ = writeln!(out, "{text}");
    };
    match command {
        Command::Run { config } => {
            let config = load_config(&config)?;
            let traj = run(&config)?;
            let last = traj.last();
            say(format!(
                "t={} energy_u={:e} energy_v={:e} records={} snapshots={}",
                last.t,
                last.energy_u,
                last.energy_v,
                traj.records.len(),
                traj.snapshots.len()
            ));
        }
        Command::Preset { name, variant, emit } => {
            let config = preset(&name, variant.as_deref())?;
            let json = config.to_json();
            match emit {
                Some(path) => write_file(&path, &(json + "\n"))?,
                None => say(json),
            }
        }
        Command::Regime { mu, nu, config, simulate } => {
            let config = config.map(|p| load_config(&p)).transpose()?;
            say(regime_report(mu, nu, config.as_ref(), simulate)?.to_string());
        }
        Command::Eig { config, state, species } => {
            let config = load_config(&config)?;
            let point = match state {
                StateArg::Trivial => LinearizationPoint::Trivial(match species {
                    SpeciesArg::U => Species::U,
                    SpeciesArg::V => Species::V,
                }),
                StateArg::UStar => LinearizationPoint::UStar,
                StateArg::VStar => LinearizationPoint::VStar,
            };
            let ep = eigen_at(&config, point)?;
            say(format!("lambda: {:.10}", ep.lambda));
            say(format!("residual: {:e}", ep.residual));
            say(format!("invader: {}", point.invader()));
        }
        Command::Sweep { config, mu, nu, out: path } => {
            let config = load_config(&config)?;
            let text = format_sweep(&sweep(&config, &mu, &nu)?);
            match path {
                Some(p) => write_file(&p, &text)?,
                None => say(text.trim_end().to_string()),
            }
        }
    }
    Ok(())
}

/// Parses `args` and runs the command. Returns the process exit code.
pub fn main_with_args<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{}", e.render());
                    EXIT_OK
                }
                _ => {
                    let _ = write!(err, "{}", e.render());
                    EXIT_USAGE
                }
            };
        }
    };
    match execute(cli.command, out) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}
