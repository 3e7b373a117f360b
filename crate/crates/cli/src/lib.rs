//! Command-line driver for c-fair polynomial post-processing.

pub mod commands;
pub mod error;
pub mod ingest;
pub mod model_file;
pub mod report;

use std::ffi::OsString;
use std::process::ExitCode;

use clap::Parser;

pub use commands::Cli;
pub use error::CliError;

/// Parses `args`, runs the command and maps the outcome onto the exit codes:
/// 0 success, 1 usage error, 2 data error, 3 solver non-convergence.
pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
