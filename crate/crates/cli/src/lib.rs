//! Command-line front end for `chemostat-dde-core`: scenario files with
//! dotted keys, command dispatch, CSV and report artifacts, and parallel
//! parameter sweeps.
//!
//! Exit codes: 0 on success, 2 when a classification is indeterminate,
//! 1 on any error (parse errors, unknown keys, model errors, tolerance
//! breaches).

pub mod commands;
pub mod config;
pub mod error;
pub mod harness;
pub mod output;
pub mod scenario;

pub use commands::{run, Command, Outcome, WORKERS_ENV};
pub use config::{Config, Value};
pub use error::{Breach, CliError, Result};
pub use scenario::Scenario;

/// Reads a scenario file (if any) and applies `--set` overrides in order.
pub fn load_config(path: Option<&std::path::Path>, overrides: &[String]) -> Result<Config> {
    let mut config = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| CliError::io(p, e))?;
            Config::parse(&text, &p.display().to_string())?
        }
        None => Config::new(),
    };
    for o in overrides {
        config.apply_override(o)?;
    }
    Ok(config)
}
