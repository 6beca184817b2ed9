//! `privloc` command-line driver.

mod align;
mod evaluate;
mod localize;
mod obfuscate;
mod synth;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

/// Exit status for a finished run in which no query was localized.
const EXIT_NONE_LOCALIZED: u8 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "privloc",
    version,
    about = "Structureless visual localization with image obfuscation"
)]
struct Cli {
    /// Seed for every randomized step.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker threads, 0 for all cores.
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Render obfuscated versions of every image in a directory.
    Obfuscate(obfuscate::Args),
    /// Estimate query poses against a posed reference scene.
    Localize(localize::Args),
    /// Score localization results against ground-truth poses.
    Evaluate(evaluate::Args),
    /// Align estimated camera poses to ground truth with a similarity transform.
    Align(align::Args),
    /// Write a synthetic scene, matches and descriptors fixture.
    Synth(synth::Args),
}

/// Bad flag combination detected after parsing.
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct UsageError(pub String);

/// Successful runs report whether anything was localized.
pub enum Outcome {
    Done,
    NoneLocalized,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
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
    if let Err(e) = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads)
        .build_global()
    {
        eprintln!("error: {e}");
        return ExitCode::from(2);
    }
    let result = match cli.command {
        Command::Obfuscate(a) => obfuscate::run(&a, cli.seed),
        Command::Localize(a) => localize::run(&a, cli.seed),
        Command::Evaluate(a) => evaluate::run(&a),
        Command::Align(a) => align::run(&a),
        Command::Synth(a) => synth::run(&a, cli.seed),
    };
    match result {
        Ok(Outcome::Done) => ExitCode::SUCCESS,
        Ok(Outcome::NoneLocalized) => {
            eprintln!("no query was localized");
            ExitCode::from(EXIT_NONE_LOCALIZED)
        }
        Err(e) if e.downcast_ref::<UsageError>().is_some() => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
