//! Experiment runner behind the `andersonspec` binary.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;

use config::{Command, ExperimentConfig, Overrides};
use error::CliError;

/// Resolves the config, runs the command on a pool of the configured size and
/// writes all outputs. Verification failures are reported after emission.
pub fn execute(
    command: Command,
    config: ExperimentConfig,
    overrides: &Overrides,
) -> Result<ExperimentConfig, CliError> {
    let config = config.resolve(command, overrides)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers())
        .build()
        .map_err(|e| CliError::Config(format!("cannot start {} workers: {e}", config.workers())))?;
    let outcome = pool.install(|| commands::run(&config))?;
    output::emit(&config, &outcome.output)?;
    if !outcome.failed_checks.is_empty() {
        return Err(CliError::Verification(outcome.failed_checks));
    }
    Ok(config)
}
