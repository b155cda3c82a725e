//! `coguide`: train, evaluate and run the two-stage intent/slot model.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "coguide", version, about = "Joint multi-intent detection and slot filling")]
struct Cli {
    /// Log verbosity: -v for per-epoch progress, -vv for debug output.
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train on a corpus, keeping the epoch with the best dev accuracy.
    Train(TrainArgs),
    /// Score a checkpoint on a labeled corpus.
    Eval(EvalArgs),
    /// Label unannotated utterances.
    Predict(PredictArgs),
    /// Write a seeded synthetic train/dev/test corpus.
    Synth(SynthArgs),
    /// Compare analytic and finite-difference gradients of every component.
    Gradcheck(GradcheckArgs),
}

/// Training hyperparameters. Dedicated flags win over `--set`, which wins
/// over `--config`, which wins over the built-in defaults.
#[derive(Debug, Args)]
struct ConfigArgs {
    /// Flat `key = value` file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Extra `key=value` overrides, applied after the config file.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    /// Evaluation threads (0 = one per core).
    #[arg(long)]
    workers: Option<usize>,
    /// Use full-size (256) dimensions instead of the desk-scale defaults.
    #[arg(long)]
    full_scale: bool,
    /// Treat every graph edge as one relation type.
    #[arg(long)]
    collapse_relations: bool,
    /// Feed first-pass intent features straight to the second intent head.
    #[arg(long)]
    no_s2i_guidance: bool,
    /// Feed the intent-aware BiLSTM output straight to the second slot head.
    #[arg(long)]
    no_i2s_guidance: bool,
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[arg(long)]
    train: PathBuf,
    #[arg(long)]
    dev: PathBuf,
    /// Scored with the best checkpoint after training.
    #[arg(long)]
    test: Option<PathBuf>,
    /// Where to write the best checkpoint.
    #[arg(long)]
    checkpoint: PathBuf,
    /// Per-epoch TSV (default: `<checkpoint>.history.tsv`).
    #[arg(long)]
    history: Option<PathBuf>,
    /// Write the test report as `key=value` lines here.
    #[arg(long)]
    report: Option<PathBuf>,
    #[command(flatten)]
    config: ConfigArgs,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    corpus: PathBuf,
    /// One tab-separated line per utterance with both passes' decisions.
    #[arg(long)]
    dump: Option<PathBuf>,
    /// Write the report as `key=value` lines here.
    #[arg(long)]
    report: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    workers: usize,
}

#[derive(Debug, Args)]
struct PredictArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    /// Token-per-line blocks separated by blank lines.
    #[arg(long)]
    input: PathBuf,
    /// Defaults to standard output.
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    workers: usize,
}

#[derive(Debug, Args)]
struct SynthArgs {
    /// Receives `train.txt`, `dev.txt` and `test.txt`.
    #[arg(long)]
    out_dir: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    train_size: Option<usize>,
    #[arg(long)]
    dev_size: Option<usize>,
    #[arg(long)]
    test_size: Option<usize>,
    #[arg(long)]
    intents: Option<usize>,
    #[arg(long)]
    slot_types: Option<usize>,
    #[arg(long)]
    vocab_size: Option<usize>,
    #[arg(long)]
    max_intents: Option<usize>,
}

#[derive(Debug, Args)]
struct GradcheckArgs {
    /// Largest accepted relative error; the absolute floor is 1% of it.
    #[arg(long, default_value_t = 1e-4)]
    tolerance: f64,
    #[arg(long)]
    seed: Option<u64>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    let result = match cli.command {
        Command::Train(a) => commands::train(a),
        Command::Eval(a) => commands::eval(a),
        Command::Predict(a) => commands::predict(a),
        Command::Synth(a) => commands::synth(a),
        Command::Gradcheck(a) => commands::gradcheck(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}
