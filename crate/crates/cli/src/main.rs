use std::process::ExitCode;

use clap::Parser;

use sddcp_cli::commands::{cmd_bench, cmd_certify, cmd_solve};
use sddcp_cli::{Cli, Command};

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.verbose { "info" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    let result = match &cli.command {
        Command::Solve(args) => cmd_solve(args).map(|_| ()),
        Command::Bench(args) => cmd_bench(args).map(|_| ()),
        Command::Certify(args) => cmd_certify(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
