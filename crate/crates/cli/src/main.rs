mod args;
mod commands;
mod exit;
mod setup;

use std::process::ExitCode;

use clap::Parser;
use tracing_subscriber::EnvFilter;

use args::{Cli, Command};
use commands::RunKind;

fn init_logging(verbose: u8) {
    let default = match verbose {
        0 => "warn",
        1 => "info",
        2 => "debug",
        _ => "trace",
    };
    let filter = EnvFilter::try_from_env("RMCONTRAST_LOG").unwrap_or_else(|_| EnvFilter::new(default));
    tracing_subscriber::fmt()
        .with_env_filter(filter)
        .with_writer(std::io::stderr)
        .init();
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    init_logging(cli.verbose);
    let result = match &cli.command {
        Command::Explain(a) => commands::run(a, RunKind::Explain),
        Command::Sensitivity(a) => commands::run(a, RunKind::Sensitivity),
        Command::Representatives(a) => commands::run(a, RunKind::Representatives),
        Command::CompareModels(a) => commands::run(a, RunKind::CompareModels),
        Command::Winrate(a) => commands::winrate(a),
        Command::Ablate(a) => commands::ablate(a),
        Command::Discover(a) => commands::discover(a),
        Command::Report(a) => commands::report(a),
        Command::MockServe(a) => commands::mock_serve(a),
        Command::Replay(a) => commands::replay_run(a),
    };
    match result {
        Ok(()) => ExitCode::from(exit::OK),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit::code(&e))
        }
    }
}
