//! `doanet`: config-driven runs of the DOA pipeline.
//!
//! Every command reads one TOML config (plus its includes), writes under
//! `--out`, and records the config hash and artifact checksums in
//! `manifest.json`. Failures print one JSON line on stderr; configuration and
//! input errors exit with code 2, runtime failures with 1.

mod commands;
mod config;
mod failure;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::commands::Context;
use crate::failure::Failure;

#[derive(Debug, Parser)]
#[command(name = "doanet", version, about = "Multi-speaker DOA estimation with CNNs on STFT phase maps")]
struct Cli {
    /// Run configuration (TOML).
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Overrides the config's top-level seed.
    #[arg(long, global = true, value_name = "U64")]
    seed: Option<u64>,
    /// Caps the worker thread count.
    #[arg(long, global = true, value_name = "N")]
    threads: Option<usize>,
    /// Output directory, created when missing.
    #[arg(long, global = true, value_name = "DIR", default_value = "out")]
    out: PathBuf,
    /// Suppresses progress messages.
    #[arg(long, short, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulates the RIR bank of `[simulate]` into `<out>/bank`.
    Simulate,
    /// Builds the training set of `[synth]` into `<out>/dataset.dset`.
    Synth,
    /// Trains a network on `[train]`, writing `model.dnet` and `training_log.csv`.
    Train,
    /// Localizes one block from a WAV file or a simulated mixture (`[infer]`).
    Infer,
    /// Runs the `[eval]` experiment, writing `results.csv` and `trials.csv`.
    Eval,
    /// Runs the convolution-depth ablation of `[ablate]`, writing `ablation.csv`.
    Ablate,
    /// Runs the `[dynamic]` moving-speaker scenario, writing traces and heatmaps.
    Dynamic,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Self::Simulate => "simulate",
            Self::Synth => "synth",
            Self::Train => "train",
            Self::Infer => "infer",
            Self::Eval => "eval",
            Self::Ablate => "ablate",
            Self::Dynamic => "dynamic",
        }
    }
}

fn run(cli: &Cli) -> Result<(), Failure> {
    let path = cli.config.as_ref().ok_or_else(|| Failure::config("config", "--config is required"))?;
    let loaded = config::load(path, cli.seed)?;
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Failure::config("threads", "--threads must be positive"));
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| Failure::runtime(e.to_string()))?;
    }
    std::fs::create_dir_all(&cli.out)?;
    let ctx = Context { config: &loaded.config, out: &cli.out, quiet: cli.quiet };
    let name = cli.command.name();
    let mut artifacts = match cli.command {
        Command::Simulate => commands::simulate(&ctx)?,
        Command::Synth => commands::synth(&ctx)?,
        Command::Train => commands::train_cmd(&ctx)?,
        Command::Dynamic => commands::dynamic(&ctx)?,
        Command::Infer | Command::Eval | Command::Ablate => {
            let (files, text) = match cli.command {
                Command::Infer => commands::infer(&ctx)?,
                Command::Eval => commands::eval(&ctx)?,
                _ => commands::ablate(&ctx)?,
            };
            print!("{text}");
            files
        }
    };
    let resolved = PathBuf::from(format!("{name}.config.toml"));
    std::fs::write(cli.out.join(&resolved), &loaded.canonical)?;
    artifacts.push(resolved);
    manifest::record(&cli.out, name, loaded.config.seed, &loaded.sha256(), &artifacts)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("{}", f.to_line());
            ExitCode::from(f.exit_code() as u8)
        }
    }
}
