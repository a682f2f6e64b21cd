use clap::Parser;
use std::process::ExitCode;

fn main() -> ExitCode {
    let code = arbor::cli::run(arbor::cli::Cli::parse());
    ExitCode::from(code as u8)
}
