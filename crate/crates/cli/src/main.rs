//! `crsvm` command-line tool. Failures print one `error[<class>]: <message>`
//! line on stderr and exit with status 1 (2 for usage errors).

mod args;
mod commands;

use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;

use args::{Cli, Command};

fn one_line(msg: &str) -> String {
    msg.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => e.exit(),
        Err(e) => {
            let text = e.to_string();
            let first = text.lines().next().unwrap_or("invalid usage");
            eprintln!("error[usage]: {}", one_line(first.trim_start_matches("error: ")));
            return ExitCode::from(2);
        }
    };
    let result = match &cli.command {
        Command::Datagen(a) => commands::datagen(a),
        Command::Train(a) => commands::train_cmd(a),
        Command::Predict(a) => commands::predict_cmd(a),
        Command::Tune(a) => commands::tune_cmd(a),
        Command::Bench(a) => commands::bench_cmd(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error[{}]: {}", e.class(), one_line(&e.to_string()));
            ExitCode::FAILURE
        }
    }
}
