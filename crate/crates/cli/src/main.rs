mod args;
mod commands;
mod config;
mod data;

use std::fmt;
use std::process::ExitCode;

use clap::{CommandFactory, FromArgMatches};

use args::Cli;

/// A bad invocation rather than a failed run; exits with status 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

const USAGE: u8 = 2;
const FAILURE: u8 = 1;

fn exit_code(e: &anyhow::Error) -> u8 {
    if e.downcast_ref::<UsageError>().is_some() {
        return USAGE;
    }
    match e.downcast_ref::<tsimg::Error>() {
        Some(
            tsimg::Error::Routing(_)
            | tsimg::Error::InvalidArgument(_)
            | tsimg::Error::NonIntegerSegment { .. }
            | tsimg::Error::HorizonTooLong { .. }
            | tsimg::Error::IndivisiblePatch { .. },
        ) => USAGE,
        _ => FAILURE,
    }
}

fn main() -> ExitCode {
    let argv = match config::expand_config_flag(std::env::args_os().collect()) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(USAGE);
        }
    };
    let cmd = Cli::command();
    let matches = match cmd.clone().try_get_matches_from(argv) {
        Ok(m) => m,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    let cli = match Cli::from_arg_matches(&matches) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(USAGE);
        }
    };
    let pairs = match matches.subcommand() {
        Some((name, sub)) => cmd
            .find_subcommand(name)
            .map(|c| config::resolved_pairs(c, sub))
            .unwrap_or_default(),
        None => Vec::new(),
    };
    match commands::run(cli.command, pairs) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
