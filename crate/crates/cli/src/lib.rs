//! Batch driver for the `weakval` library: TOML-configured sweeps written
//! as CSV, plus fixed-seed verification suites.

pub mod app;
pub mod config;
pub mod error;
pub mod output;
pub mod scenario;
pub mod verify;

pub use config::{parse_config, RunConfig, Scenario};
pub use error::CliError;
pub use scenario::{run_table, Table};

/// Environment variable holding the default worker count.
pub const WORKERS_ENV: &str = "WEAKVAL_WORKERS";

/// `--workers`, then `WEAKVAL_WORKERS`, then the available parallelism.
pub fn resolve_workers(flag: Option<usize>) -> Result<usize, CliError> {
    if let Some(n) = flag {
        return if n == 0 { Err(CliError::Config("--workers must be positive".into())) } else { Ok(n) };
    }
    match std::env::var(WORKERS_ENV) {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(n),
            _ => Err(CliError::Config(format!("{WORKERS_ENV} must be a positive integer, got `{v}`"))),
        },
        Err(_) => Ok(std::thread::available_parallelism().map_or(1, |n| n.get())),
    }
}
