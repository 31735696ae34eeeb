mod cli;
mod commands;
mod config;

use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;

use cli::{Cli, Command};
use commands::CliResult;

fn dispatch(cli: Cli) -> CliResult {
    match cli.command {
        Command::Synth { common, out, n_candidates } => commands::synth(&common, out, n_candidates),
        Command::Train { common, dataset, checkpoint, out, variant, n_candidates, resume } => {
            commands::train(&common, dataset, checkpoint, out, variant, n_candidates, resume)
        }
        Command::Generate { common, checkpoint, dataset, out, variant, n_candidates, vocab } => {
            commands::generate(&common, checkpoint, dataset, out, variant, n_candidates, vocab)
        }
        Command::Evaluate { common, predictions, dataset, out } => {
            commands::evaluate(&common, &predictions, dataset, out)
        }
        Command::Oracle { common, dataset, mode, hist_out, out, n_candidates } => {
            commands::oracle(&common, dataset, mode.into(), hist_out, out, &n_candidates)
        }
        Command::Ablate { common, dataset, out, variant, n_candidates, seeds } => {
            commands::ablate(&common, dataset, out, &variant, &n_candidates, &seeds)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
