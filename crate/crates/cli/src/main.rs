//! `svma` command-line tool.
//!
//! Exit codes: 0 success, 2 usage or configuration error, 3 numeric fault.

mod config;
mod eval;
mod lift;
mod manifest;
mod plot;
mod render;
mod synth;
mod train;

use std::fmt;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

/// A user-facing input problem; always exit code 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub const EXIT_USAGE: u8 = 2;
pub const EXIT_NUMERIC: u8 = 3;

#[derive(Parser)]
#[command(name = "svma", version, about = "Unsupervised 2D-to-3D human pose lifting")]
struct Cli {
    /// Print debug logging.
    #[arg(long, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train the lifter; writes checkpoints, a loss log and a run manifest.
    Train(train::TrainArgs),
    /// Score a checkpoint on a dataset with 3D ground truth.
    Eval(eval::EvalArgs),
    /// Lift a 2D keypoint file to 3D with a checkpoint.
    Lift(lift::LiftArgs),
    /// Draw 3D poses as stick figures (PNG or SVG by extension).
    Plot(plot::PlotArgs),
    /// Write synthetic camera-frame poses as a keypoint file.
    Synth(synth::SynthArgs),
}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<svma::Error>() {
            return match e {
                svma::Error::NumericFault { .. } => EXIT_NUMERIC,
                _ => EXIT_USAGE,
            };
        }
    }
    EXIT_USAGE
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.verbose { "debug" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
    let result = match cli.command {
        Command::Train(a) => train::run(a),
        Command::Eval(a) => eval::run(a),
        Command::Lift(a) => lift::run(a),
        Command::Plot(a) => plot::run(a),
        Command::Synth(a) => synth::run(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
