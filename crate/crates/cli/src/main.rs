mod args;
mod commands;

use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Command};

/// Failure split by exit status: 2 for bad invocations, 1 for everything else.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Runtime(svdphat::Error),
}

impl From<svdphat::Error> for CliError {
    fn from(e: svdphat::Error) -> Self {
        CliError::Runtime(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(e.into())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n.into()).build_global() {
            eprintln!("doa: cannot start thread pool: {e}");
            return ExitCode::from(1);
        }
    }
    let result = match &cli.command {
        Command::BuildModel(a) => commands::build_model(&cli, a),
        Command::Localize(a) => commands::localize(&cli, a),
        Command::Simulate(a) => commands::simulate(&cli, a),
        Command::Benchmark(a) => commands::benchmark(&cli, a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            eprintln!("doa: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Runtime(e)) => {
            eprintln!("doa: {e}");
            ExitCode::from(1)
        }
    }
}
