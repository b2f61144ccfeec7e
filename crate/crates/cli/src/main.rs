use std::process::ExitCode;

use clap::Parser;

use tsvrp_cli::{run, Cli};

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(outcome) => {
            print!("{}", outcome.report);
            ExitCode::from(outcome.status)
        }
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code())
        }
    }
}
