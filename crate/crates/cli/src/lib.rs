//! Command-line front end: file formats, configuration resolution and the
//! `simulate`, `fit`, `adjust`, `plot-data` and `report` subcommands.

pub mod args;
pub mod commands;
pub mod config;
pub mod error;
pub mod io;
pub mod plot;
pub mod report;

use std::ffi::OsString;

use clap::Parser;

use args::{Cli, Command};
use error::{CliError, Result};

fn dispatch(command: &Command) -> Result<String> {
    match command {
        Command::Simulate(a) => commands::simulate(a),
        Command::Fit(a) => commands::fit(a),
        Command::Adjust(a) => commands::adjust(a),
        Command::PlotData(a) => plot::plot_data(a),
        Command::Report(a) => report::report(a),
    }
}

/// Runs the tool on `argv` and returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let outcome = match cli.workers {
        Some(0) => Err(CliError::usage("--workers must be at least 1")),
        workers => rayon::ThreadPoolBuilder::new()
            .num_threads(workers.unwrap_or(0))
            .build()
            .map_err(|e| CliError::usage(format!("cannot start worker pool: {e}")))
            .and_then(|pool| pool.install(|| dispatch(&cli.command))),
    };
    match outcome {
        Ok(summary) => {
            print!("{summary}");
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
