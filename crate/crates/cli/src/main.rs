//! `slim`: compress layer weights, evaluate the result, and compute budgets.

mod args;
mod commands;
mod error;
mod load;

use std::process::ExitCode;

use clap::Parser;

use crate::args::{Cli, Command};

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("SLIM_LOG", "warn")).init();

    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };

    let result = match cli.command {
        Command::Compress(a) => commands::compress::run(a),
        Command::Eval(a) => commands::eval::run(a),
        Command::Budget(a) => commands::budget::run(a),
        Command::OracleAlpha(a) => commands::oracle::run(a),
        Command::Calib(a) => commands::calib::run(a),
        Command::GenFixture(a) => commands::fixture::run(a),
    };

    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
