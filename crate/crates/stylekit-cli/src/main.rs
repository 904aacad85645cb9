//! `stylekit` — corpus statistics, emotion-coherent augmentation, style
//! training, and objective evaluation as one reproducible pipeline.
//!
//! Subcommands run independently but compose through the filesystem: each
//! reads the shared config plus earlier stages' outputs, and writes its
//! own files under the output directory. Given identical inputs, flags,
//! and seed, every command produces byte-identical outputs.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand, ValueEnum};

use stylekit::augment::PairingMode;

mod commands;
mod config;
mod error;

use config::PipelineConfig;
use error::CliError;

#[derive(Parser)]
#[command(
    name = "stylekit",
    version,
    about = "Expressive-style corpus augmentation and training pipeline"
)]
struct Cli {
    /// Pipeline config file (flat `key = value` lines).
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Master seed; overrides the config file.
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,

    /// Output directory; overrides the config file.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Corpus length statistics and the inter-sentence pause fit.
    Stats,
    /// Label utterances with emotions and apply the confidence threshold.
    Label,
    /// Build sentence pairs and render the augmented corpus.
    Augment {
        /// How pairs are selected.
        #[arg(long, value_enum, default_value_t = ModeArg::Emotion)]
        mode: ModeArg,
    },
    /// Train the style extractor and write a checkpoint.
    TrainStyle,
    /// Evaluate a checkpoint: pause realism, text-predicted style, probe.
    Eval,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    /// Naturally adjacent sentences, labels ignored.
    Consecutive,
    /// Sentences sharing an effective emotion label.
    Emotion,
}

impl From<ModeArg> for PairingMode {
    fn from(mode: ModeArg) -> Self {
        match mode {
            ModeArg::Consecutive => PairingMode::Consecutive,
            ModeArg::Emotion => PairingMode::EmotionMatched,
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            // Help and version are successful exits; anything else is a
            // validation failure under the exit-code contract.
            let code = match err.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = err.print();
            return ExitCode::from(code);
        }
    };

    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("{err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let mut config = match &cli.config {
        Some(path) => PipelineConfig::load(path)?,
        None => PipelineConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(out) = cli.out {
        config.out_dir = out;
    }

    match cli.command {
        Command::Stats => commands::stats::run(&config),
        Command::Label => commands::label::run(&config),
        Command::Augment { mode } => commands::augment::run(&config, mode.into()),
        Command::TrainStyle => commands::train_style::run(&config),
        Command::Eval => commands::eval::run(&config),
    }
}
