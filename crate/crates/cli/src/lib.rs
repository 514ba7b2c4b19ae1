//! Command-line front end: configuration, command dispatch and artifact
//! export.

pub mod commands;
pub mod config;

pub use config::{ConfigError, RunConfig};

use std::io::Write;
use std::path::PathBuf;
use thiserror::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Command {
    Check,
    Equilibria,
    Synthesize,
    Validate,
    Portrait,
}

/// Documented outcome of a command that ran to completion.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Outcome {
    Pass,
    ConditionFail,
    NoConvergence,
    ValidationFail,
}

impl Outcome {
    pub fn code(self) -> i32 {
        match self {
            Outcome::Pass => 0,
            Outcome::ConditionFail => 3,
            Outcome::NoConvergence => 4,
            Outcome::ValidationFail => 5,
        }
    }
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Core(#[from] synthesol_core::Error),
    #[error("{0}")]
    Input(String),
}

impl CliError {
    /// Process exit code: 2 for configuration problems, 1 otherwise.
    pub fn code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Core(synthesol_core::Error::InvalidSpec(_)) => 2,
            _ => 1,
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Core(e.into())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Invocation {
    pub command: Command,
    pub config: PathBuf,
    pub force: bool,
    pub out: Option<PathBuf>,
    pub field: Option<PathBuf>,
}

pub fn load_config(path: &std::path::Path) -> Result<RunConfig, ConfigError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ConfigError::Unreadable { path: path.display().to_string(), message: e.to_string() })?;
    config::parse(&text)
}

/// Runs one command, printing its primary artifact to `stdout`.
pub fn run(inv: &Invocation, stdout: &mut dyn Write) -> Result<Outcome, CliError> {
    let mut cfg = load_config(&inv.config)?;
    if let Some(out) = &inv.out {
        cfg.output_dir = out.clone();
    }
    if let Some(field) = &inv.field {
        cfg.validate.field = Some(field.clone());
    }
    match inv.command {
        Command::Check => commands::check(&cfg, stdout),
        Command::Equilibria => commands::equilibria(&cfg, stdout),
        Command::Synthesize => commands::synthesize(&cfg, inv.force, stdout),
        Command::Validate => commands::validate(&cfg, stdout),
        Command::Portrait => commands::portrait(&cfg, stdout),
    }
}
