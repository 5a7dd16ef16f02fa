use std::process::ExitCode;

use clap::Parser;
use freeatoms_cli::args::Cli;

fn main() -> ExitCode {
    let cfg = Cli::parse().into_config();
    ExitCode::from(freeatoms_cli::main_with(cfg))
}
