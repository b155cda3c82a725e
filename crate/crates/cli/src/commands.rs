use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::ops::ControlFlow;
use std::path::{Path, PathBuf};

use coguide::checkpoint::{self, Checkpoint};
use coguide::config::TrainConfig;
use coguide::corpus::{parse_corpus, parse_tokens, serialize, write_corpus, Utterance};
use coguide::gradsuite::{run_grad_suite, GradSuiteSpec};
use coguide::synth::{generate_synthetic, SynthSpec};
use coguide::training::{decode_labels, evaluate, predict_all, train_with, EpochRecord};
use coguide::Error;
use coguide_autodiff::Tolerance;

use crate::{ConfigArgs, EvalArgs, GradcheckArgs, PredictArgs, SynthArgs, TrainArgs};

pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    fn usage(message: impl Into<String>) -> Self {
        Self { code: 2, message: message.into() }
    }

    fn runtime(message: impl Into<String>) -> Self {
        Self { code: 1, message: message.into() }
    }
}

/// Missing inputs and bad settings are usage errors; anything that goes
/// wrong after the inputs were found is a runtime failure.
impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::Io { .. } | Error::Config(_) => Self::usage(e.to_string()),
            _ => Self::runtime(e.to_string()),
        }
    }
}

type CliResult = Result<(), CliError>;

fn write_file(path: &Path, text: &str) -> CliResult {
    fs::write(path, text).map_err(|e| CliError::runtime(format!("{}: {e}", path.display())))
}

fn build_config(a: &ConfigArgs) -> Result<TrainConfig, CliError> {
    let mut cfg = if a.full_scale { TrainConfig::full_scale() } else { TrainConfig::desk() };
    if let Some(path) = &a.config {
        cfg.apply_file(path).map_err(|e| CliError::usage(format!("{}: {e}", path.display())))?;
    }
    for kv in &a.overrides {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| CliError::usage(format!("--set expects KEY=VALUE, got `{kv}`")))?;
        cfg.set(k.trim(), v.trim()).map_err(CliError::from)?;
    }
    if let Some(v) = a.seed {
        cfg.seed = v;
    }
    if let Some(v) = a.epochs {
        cfg.epochs = v;
    }
    if let Some(v) = a.batch_size {
        cfg.batch_size = v;
    }
    if let Some(v) = a.learning_rate {
        cfg.learning_rate = v;
    }
    if let Some(v) = a.workers {
        cfg.workers = v;
    }
    cfg.collapse_relations |= a.collapse_relations;
    cfg.no_s2i_guidance |= a.no_s2i_guidance;
    cfg.no_i2s_guidance |= a.no_i2s_guidance;
    cfg.validate()?;
    Ok(cfg)
}

fn default_history(checkpoint: &Path) -> PathBuf {
    let mut name = checkpoint.file_name().unwrap_or_default().to_os_string();
    name.push(".history.tsv");
    checkpoint.with_file_name(name)
}

pub fn train(a: TrainArgs) -> CliResult {
    let cfg = build_config(&a.config)?;
    let train_set = parse_corpus(&a.train)?;
    let dev_set = parse_corpus(&a.dev)?;
    let test_set = a.test.as_deref().map(parse_corpus).transpose()?;
    log::info!("{} train / {} dev utterances", train_set.len(), dev_set.len());

    let trained = train_with(&cfg, &train_set, &dev_set, |r| {
        log::info!(
            "epoch {:>4}  loss {:>10.4}  intent {:.4}  slot_f1 {:.4}  overall {:.4}",
            r.epoch,
            r.mean_loss,
            r.dev.intent_accuracy,
            r.dev.slot_f1,
            r.dev.overall_accuracy
        );
        ControlFlow::Continue(())
    })?;
    checkpoint::save_trained(&a.checkpoint, &trained).map_err(|e| CliError::runtime(e.to_string()))?;

    let mut history = String::from(EpochRecord::HEADER);
    history.push('\n');
    for r in &trained.history {
        history.push_str(&r.to_tsv());
        history.push('\n');
    }
    let history_path = a.history.clone().unwrap_or_else(|| default_history(&a.checkpoint));
    write_file(&history_path, &history)?;

    let best = trained.best();
    println!(
        "best epoch {} of {}: dev overall {:.4}, intent {:.4}, slot F1 {:.4}",
        trained.best_epoch,
        trained.history.len(),
        best.dev.overall_accuracy,
        best.dev.intent_accuracy,
        best.dev.slot_f1
    );
    println!("checkpoint: {}", a.checkpoint.display());
    println!("history: {}", history_path.display());

    if let Some(test_set) = test_set {
        let ev = evaluate(&trained.model, &trained.params, &trained.vocab, &test_set, cfg.workers)?;
        println!("test report:");
        print!("{}", ev.report.to_table());
        if let Some(path) = &a.report {
            write_file(path, &ev.report.to_kv())?;
        }
    }
    Ok(())
}

fn load_checkpoint(path: &Path) -> Result<Checkpoint, CliError> {
    checkpoint::load(path).map_err(CliError::from)
}

pub fn eval(a: EvalArgs) -> CliResult {
    let ck = load_checkpoint(&a.checkpoint)?;
    let corpus = parse_corpus(&a.corpus)?;
    let ev = evaluate(&ck.model, &ck.params, &ck.vocab, &corpus, a.workers)?;
    print!("{}", ev.report.to_table());
    if let Some(path) = &a.report {
        write_file(path, &ev.report.to_kv())?;
    }
    if let Some(path) = &a.dump {
        let mut out = String::new();
        for ((u, o), p) in corpus.iter().zip(&ev.outcomes).zip(&ev.predictions) {
            let first_tags: Vec<&str> = p.slots0.iter().map(|&i| ck.vocab.slot(i)).collect();
            let first_intents: Vec<&str> = p.intents0.iter().map(|&i| ck.vocab.intent(i)).collect();
            let _ = writeln!(
                out,
                "{}\t{}\t{}\t{}\t{}\t{}\t{}",
                u.tokens.join(" "),
                o.pred_tags.join(" "),
                o.gold_tags.join(" "),
                o.pred_intents.join("#"),
                o.gold_intents.join("#"),
                first_tags.join(" "),
                first_intents.join("#"),
            );
        }
        write_file(path, &out)?;
    }
    Ok(())
}

pub fn predict(a: PredictArgs) -> CliResult {
    let ck = load_checkpoint(&a.checkpoint)?;
    let text = fs::read_to_string(&a.input).map_err(|e| CliError::usage(format!("{}: {e}", a.input.display())))?;
    let sentences = parse_tokens(&text);
    let predictions = predict_all(&ck.model, &ck.params, &ck.vocab, &sentences, a.workers)?;
    let labeled = sentences
        .into_iter()
        .zip(&predictions)
        .map(|(tokens, p)| {
            let (intents, tags) = decode_labels(&ck.vocab, p);
            Utterance::new(tokens, tags, intents)
        })
        .collect::<coguide::Result<Vec<_>>>()?;
    let out = serialize(&labeled);
    match &a.output {
        Some(path) => write_file(path, &out),
        None => std::io::stdout()
            .write_all(out.as_bytes())
            .map_err(|e| CliError::runtime(format!("stdout: {e}"))),
    }
}

pub fn synth(a: SynthArgs) -> CliResult {
    let d = SynthSpec::default();
    let spec = SynthSpec {
        seed: a.seed.unwrap_or(d.seed),
        train: a.train_size.unwrap_or(d.train),
        dev: a.dev_size.unwrap_or(d.dev),
        test: a.test_size.unwrap_or(d.test),
        intents: a.intents.unwrap_or(d.intents),
        slot_types: a.slot_types.unwrap_or(d.slot_types),
        vocab_size: a.vocab_size.unwrap_or(d.vocab_size),
        max_intents_per_utterance: a.max_intents.unwrap_or(d.max_intents_per_utterance),
        ..d
    };
    let corpus = generate_synthetic(&spec)?;
    fs::create_dir_all(&a.out_dir).map_err(|e| CliError::runtime(format!("{}: {e}", a.out_dir.display())))?;
    for (name, split) in [("train.txt", &corpus.train), ("dev.txt", &corpus.dev), ("test.txt", &corpus.test)] {
        write_corpus(&a.out_dir.join(name), split).map_err(|e| CliError::runtime(e.to_string()))?;
    }
    println!(
        "wrote {} / {} / {} utterances to {}",
        corpus.train.len(),
        corpus.dev.len(),
        corpus.test.len(),
        a.out_dir.display()
    );
    Ok(())
}

pub fn gradcheck(a: GradcheckArgs) -> CliResult {
    if !(a.tolerance.is_finite() && a.tolerance > 0.0) {
        return Err(CliError::usage(format!("tolerance must be positive, got {}", a.tolerance)));
    }
    let mut spec = GradSuiteSpec::default();
    if let Some(seed) = a.seed {
        spec.seed = seed;
    }
    let report = run_grad_suite(&spec, Tolerance::relative(a.tolerance))?;
    print!("{report}");
    if report.passed() {
        println!("all {} components within tolerance {:e}", report.checks.len(), a.tolerance);
        Ok(())
    } else {
        Err(CliError::runtime(format!(
            "gradient check failed for: {}",
            report.failures().join(", ")
        )))
    }
}
