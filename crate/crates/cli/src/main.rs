mod args;
mod commands;

use std::process::ExitCode;

use clap::Parser;

use args::Cli;
use commands::{dispatch, Failure};

fn main() -> ExitCode {
    // clap exits with status 2 on its own parse errors
    let mut cli = Cli::parse();
    if let Err(e) = cli.opts.merge_config() {
        eprintln!("error: {e:#}");
        return ExitCode::from(2);
    }
    match dispatch(cli.command, &cli.opts) {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            match &failure {
                Failure::Usage(e) | Failure::Runtime(e) => eprintln!("error: {e:#}"),
                Failure::Checks(msg) => eprintln!("check failed: {msg}"),
            }
            ExitCode::from(failure.code())
        }
    }
}
