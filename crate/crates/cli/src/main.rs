//! `rlcheck` command-line front end.

mod args;
mod commands;
mod error;
mod source;
mod verify;

use std::process::ExitCode;

use clap::Parser;

use rlcheck::runs::Tracker;

use args::{Cli, Command};
use error::{CliError, CliResult};
use source::merge_config;

fn run(cli: Cli) -> CliResult<()> {
    let tracker = Tracker::new(&cli.runs_dir);
    let config = cli.config.as_deref();
    match cli.command {
        Command::Info(a) => commands::info(merge_config(&a, config)?),
        Command::Build(a) => commands::build(merge_config(&a, config)?),
        Command::Simulate(a) => commands::simulate(&tracker, merge_config(&a, config)?),
        Command::Train(a) => commands::train(&tracker, merge_config(&a, config)?),
        Command::Verify(a) => verify::verify(&tracker, merge_config(&a, config)?),
        Command::Sweep(a) => verify::sweep(&tracker, merge_config(&a, config)?),
        Command::Runs(c) => commands::runs(&tracker, c),
    }
}

fn main() -> ExitCode {
    // Let `rlcheck ... | head` end quietly instead of panicking on EPIPE.
    #[cfg(unix)]
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let text = e.to_string();
            let first = text.lines().find(|l| !l.trim().is_empty()).unwrap_or("invalid arguments");
            let first = first.trim_start_matches("error: ");
            eprintln!("{}", CliError::usage(first));
            return ExitCode::from(error::PARSE);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.code)
        }
    }
}
