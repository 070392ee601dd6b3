//! Command-line front end: fit models on CSV data, run simulation campaigns,
//! score methods by leave-one-out cross-validation and export samples.
//!
//! Exit codes: `0` success, `2` input error, `3` model infeasible,
//! `4` cross-validation failure.

pub mod args;
pub mod commands;
pub mod csvio;
pub mod error;

use std::ffi::OsString;
use std::io::Write;

use clap::Parser;

use args::{Cli, Command};
use commands::Io;
pub use error::{exit, CliError, CliResult};

/// Parses `argv` and runs the subcommand, returning the exit code.
pub fn run<I, T>(argv: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { exit::INPUT } else { exit::SUCCESS };
            let rendered = e.render().to_string();
            let sink: &mut dyn Write = if e.use_stderr() { stderr } else { stdout };
            let _ = sink.write_all(rendered.as_bytes());
            return code;
        }
    };
    let mut io = Io { stdout };
    let result = match &cli.command {
        Command::Fit(a) => commands::fit(a, &mut io),
        Command::Simulate(a) => commands::simulate(a, &mut io),
        Command::Cv(a) => commands::cv(a, &mut io),
        Command::Sample(a) => commands::sample(a, &mut io),
    };
    match result {
        Ok(()) => exit::SUCCESS,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.code
        }
    }
}
