use std::process::ExitCode;

use clap::Parser;
use evochain_gateway::cli::{execute, Cli};

fn main() -> ExitCode {
    ExitCode::from(execute(Cli::parse()))
}
