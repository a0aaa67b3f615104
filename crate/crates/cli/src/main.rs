//! `eco`: synthetic scenes, face rectification, strips, features, adaptation
//! and evaluation, plus the annotation service.
//!
//! Every command except `annotate` writes a run manifest (`run.json` in an
//! output directory, `<file>.run.json` next to an output file) holding the
//! resolved settings and SHA-256 hashes of everything read and written.
//! `eco rerun <manifest>` runs it again and checks the outputs match.

mod commands;
mod config;
mod error;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::adapt::{AdaptArgs, AdaptSettings};
use commands::annotate::{AnnotateArgs, AnnotateSettings};
use commands::eval::{ClassifySettings, EvalCommand, RecallSettings};
use commands::features::{FeaturesArgs, FeaturesSettings};
use commands::strips::{StripsArgs, StripsSettings};
use commands::synth::{SynthArgs, SynthSettings};
use commands::warp::{WarpArgs, WarpSettings};
use commands::{execute, execute_recorded, Command};
use config::{load_config, resolve};
use error::{CliError, CliResult, Kind};
use manifest::RunManifest;

#[derive(Parser, Debug)]
#[command(
    name = "eco",
    version,
    about = "Cross-store product recognition from rectified shelf strips"
)]
struct Cli {
    /// TOML file with one table per command (`[synth]`, `[adapt-train]`, `[eval-recall]`, ...).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Commands,
}

#[derive(Subcommand, Debug)]
enum Commands {
    Synth(SynthArgs),
    Warp(WarpArgs),
    Strips(StripsArgs),
    Features(FeaturesArgs),
    AdaptTrain(AdaptArgs),
    #[command(subcommand)]
    Eval(EvalCommand),
    Annotate(AnnotateArgs),
    /// Re-run a recorded command and compare output hashes.
    Rerun {
        manifest: PathBuf,
    },
}

fn rerun(path: &std::path::Path) -> CliResult<()> {
    let recorded = RunManifest::load(path)?;
    recorded.check_inputs()?;
    let fresh = execute_recorded(&recorded.command, recorded.config.clone())?;
    for (old, new) in recorded.outputs.iter().zip(&fresh.outputs) {
        if old != new {
            return Err(CliError {
                kind: Kind::Numeric,
                message: format!("output {} differs from the recorded run", old.path.display()),
            });
        }
    }
    if recorded.outputs.len() != fresh.outputs.len() {
        return Err(CliError {
            kind: Kind::Numeric,
            message: format!(
                "recorded run wrote {} files, re-run wrote {}",
                recorded.outputs.len(),
                fresh.outputs.len()
            ),
        });
    }
    println!("reproduced {} outputs", fresh.outputs.len());
    Ok(())
}

fn run(cli: Cli) -> CliResult<()> {
    let config = cli.config.as_deref().map(load_config).transpose()?;
    let config = config.as_ref();
    match cli.command {
        Commands::Synth(a) => execute(&resolve::<SynthSettings, _>(config, SynthSettings::NAME, &a)?).map(drop),
        Commands::Warp(a) => execute(&resolve::<WarpSettings, _>(config, WarpSettings::NAME, &a)?).map(drop),
        Commands::Strips(a) => execute(&resolve::<StripsSettings, _>(config, StripsSettings::NAME, &a)?).map(drop),
        Commands::Features(a) => {
            execute(&resolve::<FeaturesSettings, _>(config, FeaturesSettings::NAME, &a)?).map(drop)
        }
        Commands::AdaptTrain(a) => execute(&resolve::<AdaptSettings, _>(config, AdaptSettings::NAME, &a)?).map(drop),
        Commands::Eval(EvalCommand::Recall(a)) => {
            execute(&resolve::<RecallSettings, _>(config, RecallSettings::NAME, &a)?).map(drop)
        }
        Commands::Eval(EvalCommand::Classify(a)) => {
            execute(&resolve::<ClassifySettings, _>(config, ClassifySettings::NAME, &a)?).map(drop)
        }
        Commands::Annotate(a) => commands::annotate::run(&resolve::<AnnotateSettings, _>(config, "annotate", &a)?),
        Commands::Rerun { manifest } => rerun(&manifest),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            if !e.use_stderr() {
                print!("{e}");
                return ExitCode::SUCCESS;
            }
            let text = e.to_string();
            let first = text.lines().next().unwrap_or("invalid arguments");
            eprintln!("{}", CliError::usage(first.trim_start_matches("error: ")));
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.kind.exit_code() as u8)
        }
    }
}
