//! Command-line surface shared by the binary and in-process callers.

use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

use crate::output::{config_hash, write_outputs, Metadata};
use crate::{parse_config, resolve_workers, run_table, verify, CliError};

#[derive(Parser, Debug)]
#[command(name = "weakval", version, about = "Weak values, two-state vectors and pre/post-selected measurement sweeps")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Run a configured sweep and write a CSV table.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Overrides the seed in the config.
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads; defaults to $WEAKVAL_WORKERS or the core count.
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Run an invariant suite: identities, channels, probe, cnot, decoherence or all.
    Verify {
        suite: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn run(config: PathBuf, out: PathBuf, seed: Option<u64>, workers: Option<usize>) -> Result<(), CliError> {
    let text = std::fs::read_to_string(&config).map_err(|e| CliError::Io(format!("{}: {e}", config.display())))?;
    let cfg = parse_config(&text)?;
    let workers = resolve_workers(workers)?;
    let seed = seed.or(cfg.seed).unwrap_or(0);
    let table = run_table(&cfg, seed, workers)?;
    let meta = Metadata {
        tool_version: env!("CARGO_PKG_VERSION"),
        library_version: weakval::VERSION,
        scenario: cfg.scenario.name(),
        preset: cfg.preset.as_deref(),
        seed,
        config_sha256: config_hash(&text),
        columns: &table.columns,
        rows: table.rows.len(),
    };
    write_outputs(&out, &table, &meta)
}

/// Executes a parsed command; verify reports go to `stdout`.
pub fn execute<W: Write>(cli: Cli, stdout: &mut W) -> Result<(), CliError> {
    match cli.command {
        Command::Run { config, out, seed, workers } => run(config, out, seed, workers),
        Command::Verify { suite, seed } => match verify::verify(&suite, seed, stdout)? {
            0 => Ok(()),
            n => Err(CliError::VerifyFailed(n)),
        },
    }
}
