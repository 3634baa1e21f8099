//! `vesselforge` command-line front end.
//!
//! Exit codes: 0 success, 1 per-file failures, 2 configuration errors,
//! 3 checkpoint errors, 4 unmatched ids, 130 interrupted training.

mod commands;
mod config;
mod error;
mod files;

use std::process::ExitCode;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;

use clap::{Parser, Subcommand};

use commands::{evaluate, infer, preprocess, synth, train};
use error::CliError;

/// Caps the worker pool when set.
const THREADS_VAR: &str = "VESSELFORGE_THREADS";

#[derive(Parser, Debug)]
#[command(name = "vesselforge", version, about = "Adversarial retinal vessel segmentation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Grayscale, CLAHE, sharpen and background-subtract every image.
    Preprocess(preprocess::PreprocessArgs),
    /// Train the generator and discriminator.
    Train(train::TrainArgs),
    /// Segment images with a trained checkpoint.
    Infer(infer::InferArgs),
    /// Score predicted masks against ground truth.
    Evaluate(evaluate::EvaluateArgs),
    /// Write synthetic vessel images and masks.
    Synth(synth::SynthArgs),
}

fn threads() -> Result<Option<usize>, CliError> {
    match std::env::var(THREADS_VAR) {
        Err(_) => Ok(None),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(CliError::Config(format!("{THREADS_VAR} must be a positive integer, got `{v}`"))),
        },
    }
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Preprocess(a) => preprocess::run(&a),
        Command::Train(a) => {
            let stop = Arc::new(AtomicBool::new(false));
            let flag = Arc::clone(&stop);
            if let Err(e) = ctrlc::set_handler(move || flag.store(true, Ordering::SeqCst)) {
                log::warn!("interrupt handler unavailable: {e}");
            }
            train::run(&a, stop)
        }
        Command::Infer(a) => infer::run(&a),
        Command::Evaluate(a) => evaluate::run(&a),
        Command::Synth(a) => synth::run(&a),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let result = threads().and_then(|t| match t {
        Some(n) => vesselforge::par::with_workers(n, || dispatch(cli)),
        None => dispatch(cli),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            log::error!("{e}");
            ExitCode::from(e.exit_code())
        }
    }
}
