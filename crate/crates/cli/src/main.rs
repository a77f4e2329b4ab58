//! `tmax`: fit, check and use the daily maximum temperature model from the
//! command line. Exit status is 0 on success, 1 when a command fails and 2
//! on a usage error.

use std::process::ExitCode;

use clap::Parser;

mod args;
mod commands;

use args::{Cli, Command};

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .target(env_logger::Target::Stderr)
        .init();
    if let Some(n) = cli.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
        {
            eprintln!("error: thread pool: {e}");
            return ExitCode::FAILURE;
        }
    }
    let res = match &cli.command {
        Command::Fit(a) => commands::fit(a),
        Command::Predict(a) => commands::predict(a),
        Command::Impute(a) => commands::impute(a),
        Command::Loocv(a) => commands::loocv(a),
        Command::Diagnose(a) => commands::diagnose_cmd(a),
        Command::Simulate(a) => commands::simulate(a),
        Command::LocalFit(a) => commands::local_fit(a),
        Command::ChangeSummary(a) => commands::change(a),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
