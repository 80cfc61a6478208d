//! Command-line front end: configuration, artifact emission, and the five
//! workflows exposed by the `biphoton` binary.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;

use std::path::Path;

use commands::RunContext;
use config::RunConfig;
use error::CliError;

/// A workflow selectable from the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    VCurve,
    Spectrum,
    Tomo,
    Pattern,
    Timing,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::VCurve => "vcurve",
            Command::Spectrum => "spectrum",
            Command::Tomo => "tomo",
            Command::Pattern => "pattern",
            Command::Timing => "timing",
        }
    }
}

/// Overrides applied on top of the configuration file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub out: Option<String>,
    pub seed: Option<u64>,
    pub strict: bool,
}

/// Loads `config_path`, applies overrides, and runs `command`. Returns the
/// emitted files with their SHA-256 checksums.
pub fn run(command: Command, config_path: &Path, overrides: &Overrides) -> Result<Vec<(String, String)>, CliError> {
    let mut config = RunConfig::load(config_path)?;
    if let Some(out) = &overrides.out {
        config.output.directory = out.clone();
    }
    if let Some(seed) = overrides.seed {
        config.override_seed(seed);
    }
    let ctx = RunContext { config, strict: overrides.strict };
    match command {
        Command::VCurve => commands::cmd_vcurve(&ctx),
        Command::Spectrum => commands::cmd_spectrum(&ctx),
        Command::Tomo => commands::cmd_tomo(&ctx),
        Command::Pattern => commands::cmd_pattern(&ctx),
        Command::Timing => commands::cmd_timing(&ctx),
    }
}

/// Parses the `BIPHOTON_WORKERS` value: a positive thread count.
pub fn parse_workers(value: &str) -> Result<usize, CliError> {
    match value.trim().parse::<usize>() {
        Ok(n) if n > 0 => Ok(n),
        _ => Err(CliError::Config(format!("BIPHOTON_WORKERS: expected a positive integer, got {value:?}"))),
    }
}
