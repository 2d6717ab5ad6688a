//! Command-line front end: argument parsing, config merging, commands and output.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;

use std::ffi::OsString;

use clap::Parser;

use crate::commands::{execute, Outcome};
use crate::config::{Cli, ConfigFile, RunConfig};
use crate::error::CliError;

/// Parses flags, merges the config file and runs the command without writing output.
pub fn prepare_and_execute(cli: &Cli) -> Result<(RunConfig, Outcome), CliError> {
    let file = match &cli.common.config {
        Some(path) => ConfigFile::load(path)?,
        None => ConfigFile::default(),
    };
    let cfg = RunConfig::merge(&cli.common, file)?;
    let outcome = execute(&cfg, &cli.command)?;
    Ok((cfg, outcome))
}

/// Runs the program on `args` (including the program name) and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let result = prepare_and_execute(&cli).and_then(|(cfg, outcome)| {
        output::emit(&outcome.doc, cfg.format, cfg.out.as_deref())?;
        match outcome.mismatch {
            Some(msg) => Err(CliError::Mismatch(msg)),
            None => Ok(()),
        }
    });
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
