//! Epoch loop, dev-set model selection, and batch evaluation.

use std::ops::ControlFlow;

use coguide_autodiff::{Adam, ParamStore, Real, Session, Var};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::TrainConfig;
use crate::corpus::{build_vocab, EncodedUtterance, UnknownLabels, Utterance, Vocabulary};
use crate::loss::{loss_parts, total_loss, LossWeights};
use crate::metrics::{EvalReport, UtteranceOutcome};
use crate::model::{CoGuidingNet, ForwardOutput, ModelConfig, PredictionRecord, Selections};
use crate::{Error, Result};

/// Objective for one utterance, plus the forward pass that produced it.
pub fn utterance_loss<F: Real>(
    model: &CoGuidingNet,
    s: &mut Session<'_, F>,
    example: &EncodedUtterance,
    weights: &LossWeights,
    fixed: Option<&Selections>,
) -> Result<(Var, ForwardOutput)> {
    let out = model.forward_full(s, &example.token_ids, fixed)?;
    let loss = objective(s, &out, example, weights)?;
    Ok((loss, out))
}

fn objective<F: Real>(
    s: &mut Session<'_, F>,
    out: &ForwardOutput,
    example: &EncodedUtterance,
    weights: &LossWeights,
) -> Result<Var> {
    let parts = loss_parts(
        &mut s.tape,
        (out.stage1.intent_probs, out.stage2.intent_probs),
        (out.stage1.slot_probs, out.stage2.slot_probs),
        &example.intent_multihot,
        &example.slot_ids,
    )?;
    total_loss(&mut s.tape, &parts, weights)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    /// 1-based.
    pub epoch: usize,
    pub mean_loss: f64,
    pub dev: EvalReport,
}

impl EpochRecord {
    pub const HEADER: &'static str = "epoch\tmean_loss\tintent_acc\tslot_f1\toverall_acc";

    pub fn to_tsv(&self) -> String {
        format!(
            "{}\t{:.6}\t{:.4}\t{:.4}\t{:.4}",
            self.epoch, self.mean_loss, self.dev.intent_accuracy, self.dev.slot_f1, self.dev.overall_accuracy
        )
    }
}

#[derive(Debug, Clone)]
pub struct Trained {
    pub config: TrainConfig,
    pub vocab: Vocabulary,
    pub model: CoGuidingNet,
    /// Parameters from the best dev epoch.
    pub params: ParamStore<f32>,
    pub best_epoch: usize,
    pub history: Vec<EpochRecord>,
}

impl Trained {
    pub fn best(&self) -> &EpochRecord {
        &self.history[self.best_epoch - 1]
    }
}

pub fn train(config: &TrainConfig, train_set: &[Utterance], dev_set: &[Utterance]) -> Result<Trained> {
    train_with(config, train_set, dev_set, |_| ControlFlow::Continue(()))
}

/// Like [`train`], calling `observer` after every epoch. Returning
/// `Break` ends training after that epoch.
pub fn train_with<O>(
    config: &TrainConfig,
    train_set: &[Utterance],
    dev_set: &[Utterance],
    mut observer: O,
) -> Result<Trained>
where
    O: FnMut(&EpochRecord) -> ControlFlow<()>,
{
    config.validate()?;
    if dev_set.is_empty() {
        return Err(Error::Empty("dev corpus"));
    }
    let vocab = build_vocab(train_set, config.min_freq)?;
    let examples = vocab.encode_all(train_set, UnknownLabels::Error)?;
    let (model, mut params) = CoGuidingNet::init::<f32>(ModelConfig::new(config, &vocab), config.seed)?;
    let weights = LossWeights::from(config);
    let mut adam = Adam::new(config.adam(), &params);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(1));
    let mut noise = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(2));
    let mut order: Vec<usize> = (0..examples.len()).collect();

    let mut history = Vec::with_capacity(config.epochs);
    let mut best: Option<(f64, usize, ParamStore<f32>)> = None;
    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        for batch in order.chunks(config.batch_size) {
            params.zero_grads();
            let weight = 1.0 / batch.len() as f32;
            for &idx in batch {
                let mut s = Session::new(&params);
                let out = model.forward_train(&mut s, &examples[idx].token_ids, &mut noise)?;
                let loss = objective(&mut s, &out, &examples[idx], &weights)?;
                let value = s.tape.value(loss).data()[0].as_f64();
                if !value.is_finite() {
                    return Err(Error::NonFiniteLoss { epoch, utterance: idx, loss: value });
                }
                loss_sum += value;
                s.tape.backward(loss)?;
                let (tape, bindings) = s.finish();
                bindings.accumulate_into(&tape, &mut params, weight);
            }
            adam.step(&mut params)?;
        }
        let dev = evaluate(&model, &params, &vocab, dev_set, config.workers)?.report;
        let record = EpochRecord { epoch, mean_loss: loss_sum / examples.len() as f64, dev };
        log::info!("{}", record.to_tsv());
        if best.as_ref().is_none_or(|(score, _, _)| dev.overall_accuracy > *score) {
            best = Some((dev.overall_accuracy, epoch, params.clone()));
        }
        history.push(record);
        if observer(history.last().expect("just pushed")).is_break() {
            break;
        }
    }
    let (_, best_epoch, mut params) = best.ok_or(Error::Config("epochs must be positive".into()))?;
    params.clear_grads();
    Ok(Trained { config: config.clone(), vocab, model, params, best_epoch, history })
}

fn with_workers<T: Send>(workers: usize, job: impl FnOnce() -> T + Send) -> Result<T> {
    if workers == 0 {
        return Ok(job());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    Ok(pool.install(job))
}

/// Predictions for many token sequences, in input order.
pub fn predict_all<F: Real>(
    model: &CoGuidingNet,
    params: &ParamStore<F>,
    vocab: &Vocabulary,
    sentences: &[Vec<String>],
    workers: usize,
) -> Result<Vec<PredictionRecord<F>>> {
    with_workers(workers, || {
        sentences
            .par_iter()
            .map(|tokens| model.predict(params, &vocab.encode_tokens(tokens)))
            .collect::<Result<Vec<_>>>()
    })?
}

#[derive(Debug, Clone)]
pub struct Evaluation<F> {
    pub report: EvalReport,
    pub outcomes: Vec<UtteranceOutcome>,
    pub predictions: Vec<PredictionRecord<F>>,
}

/// Decoded final labels as strings.
pub fn decode_labels<F>(vocab: &Vocabulary, p: &PredictionRecord<F>) -> (Vec<String>, Vec<String>) {
    let intents = p.intents.iter().map(|&i| vocab.intent(i).to_string()).collect();
    let tags = p.slots.iter().map(|&i| vocab.slot(i).to_string()).collect();
    (intents, tags)
}

/// Scores a labeled corpus. Gold labels never seen in training simply
/// count as errors.
pub fn evaluate<F: Real>(
    model: &CoGuidingNet,
    params: &ParamStore<F>,
    vocab: &Vocabulary,
    corpus: &[Utterance],
    workers: usize,
) -> Result<Evaluation<F>> {
    let sentences: Vec<Vec<String>> = corpus.iter().map(|u| u.tokens.clone()).collect();
    let predictions = predict_all(model, params, vocab, &sentences, workers)?;
    let outcomes: Vec<UtteranceOutcome> = corpus
        .iter()
        .zip(&predictions)
        .map(|(u, p)| {
            let (pred_intents, pred_tags) = decode_labels(vocab, p);
            UtteranceOutcome {
                pred_intents,
                gold_intents: u.intents.clone(),
                pred_tags,
                gold_tags: u.slot_tags.clone(),
            }
        })
        .collect();
    let report = EvalReport::from_outcomes(&outcomes)?;
    Ok(Evaluation { report, outcomes, predictions })
}
