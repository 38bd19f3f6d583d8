use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

mod commands;
mod manifest;

/// Freeway performance measures from loop detectors fused with probe travel times.
#[derive(Debug, Parser)]
#[command(name = "pmfuse", version)]
pub struct Cli {
    /// TOML configuration; built-in defaults when omitted.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    /// Seeds to run, comma separated; overrides the configured seeds.
    #[arg(long, global = true, value_delimiter = ',')]
    pub seed: Option<Vec<u64>>,
    /// Which estimates to report.
    #[arg(long, global = true, value_enum, default_value_t = MethodChoice::Both)]
    pub method: MethodChoice,
    /// Upper bound on worker threads.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate every configured scenario and write detector, vendor and truth files.
    Simulate,
    /// Reconstruct fields with GASM and C-GASM and score them against truth.
    Conflate,
    /// Compute VMT/VHT/VHD with the selected methods.
    Report,
    /// Conflate and report, then print the scenario comparison table.
    Compare,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MethodChoice {
    Traditional,
    Hybrid,
    Both,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("missing input files:\n  {}", .0.iter().map(|p| p.display().to_string()).collect::<Vec<_>>().join("\n  "))]
    MissingInputs(Vec<PathBuf>),
    #[error(transparent)]
    Core(#[from] pmfuse::Error),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::Core(pmfuse::Error::Config { .. }) => 2,
            _ => 1,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("pmfuse: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
