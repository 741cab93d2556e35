//! `lad`: detect, stream, eval and bench subcommands over delimited text files.

mod commands;
mod manifest;

use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;
use lad_core::LadError;

use commands::Cli;

/// Exit status for unreadable or malformed input.
const EXIT_INPUT: u8 = 2;
/// Exit status for invalid flags or configuration values.
const EXIT_CONFIG: u8 = 3;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(EXIT_CONFIG),
            };
        }
    };
    match commands::dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("lad: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &LadError) -> u8 {
    match e {
        LadError::Config(_) => EXIT_CONFIG,
        _ => EXIT_INPUT,
    }
}
