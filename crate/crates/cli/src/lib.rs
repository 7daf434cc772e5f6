//! Command-line drivers around `linmarg`: CSV ingestion, fits, frequency scans,
//! joint sampling, JSON run reports and the `verify` self-check.

// `!(x > 0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod args;
pub mod commands;
pub mod error;
pub mod io;
pub mod oracle;
pub mod report;
pub mod verify;

pub use error::{exit, CliError, CliResult};

use args::{Cli, Command};

/// Environment variable capping the worker threads of parallel scans; `0` means automatic.
pub const THREADS_ENV: &str = "LINMARG_THREADS";

pub fn configure_threads() -> CliResult<()> {
    let Ok(text) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = text
        .trim()
        .parse()
        .map_err(|_| CliError::Validation(format!("{THREADS_ENV}={text:?} is not a thread count")))?;
    if n > 0 {
        // A second call in the same process fails harmlessly; the first pool stays.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    Ok(())
}

pub fn run(cli: &Cli) -> CliResult<()> {
    configure_threads()?;
    match &cli.command {
        Command::FitLinear(a) => commands::fit_linear(a),
        Command::ScanFrequency(a) => commands::scan_frequency(a),
        Command::Sample(a) => commands::sample(a),
        Command::Verify(a) => verify::verify(a),
    }
}
