//! Finite-difference checks of every trainable component at 64-bit
//! precision on a tiny model.
//!
//! Each check reduces a component's output to a scalar through a fixed
//! random weighting, so that every output element contributes with a
//! distinct coefficient.

use std::fmt;

use coguide_autodiff::{grad_check, GradCheckReport, ParamStore, Session, Tensor, Tolerance, Var};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::EncodedUtterance;
use crate::loss::LossWeights;
use crate::model::{CoGuidingNet, ModelConfig, Selections};
use crate::training::utterance_loss;
use crate::Result;

/// Sizes of the probe model and utterance.
#[derive(Debug, Clone, PartialEq)]
pub struct GradSuiteSpec {
    pub vocab_size: usize,
    pub intents: usize,
    pub slots: usize,
    pub dim: usize,
    pub heads: usize,
    pub layers: usize,
    pub window: usize,
    pub tokens: usize,
    pub seed: u64,
}

impl Default for GradSuiteSpec {
    fn default() -> Self {
        Self { vocab_size: 7, intents: 3, slots: 5, dim: 4, heads: 2, layers: 2, window: 1, tokens: 4, seed: 11 }
    }
}

impl GradSuiteSpec {
    pub fn model_config(&self) -> ModelConfig {
        ModelConfig {
            vocab_size: self.vocab_size,
            intents: self.intents,
            slots: self.slots,
            word_dim: self.dim,
            lstm_dim: self.dim,
            attn_dim: self.dim,
            hidden_dim: self.dim,
            heads: self.heads,
            layers: self.layers,
            window: self.window,
            leaky_slope: 0.2,
            vote_threshold: 0.5,
            dropout: 0.0,
            collapse_relations: false,
            no_s2i_guidance: false,
            no_i2s_guidance: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct GradSuiteReport {
    pub checks: Vec<(String, GradCheckReport)>,
    pub tolerance: Tolerance,
}

impl GradSuiteReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|(_, r)| r.passed())
    }

    pub fn max_rel_err(&self) -> f64 {
        self.checks.iter().map(|(_, r)| r.max_rel_err()).fold(0.0, f64::max)
    }

    pub fn failures(&self) -> Vec<&str> {
        self.checks.iter().filter(|(_, r)| !r.passed()).map(|(n, _)| n.as_str()).collect()
    }
}

impl fmt::Display for GradSuiteReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (name, r) in &self.checks {
            writeln!(
                f,
                "{name}: {} (max rel {:.3e}, max abs {:.3e})",
                if r.passed() { "ok" } else { "FAIL" },
                r.max_rel_err(),
                r.max_abs_err()
            )?;
            write!(f, "{r}")?;
        }
        Ok(())
    }
}

fn random(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Tensor<f64> {
    let data = (0..rows * cols).map(|_| rng.random_range(-1.0..1.0)).collect();
    Tensor::new(rows, cols, data).expect("shape matches data")
}

/// `sum(x * w)` for a fixed weight matrix `w`.
fn probe(s: &mut Session<'_, f64>, x: Var, w: &Tensor<f64>) -> coguide_autodiff::Result<Var> {
    let w = s.tape.constant(w.clone());
    let prod = s.tape.mul(x, w)?;
    s.tape.sum(prod)
}

fn to_ad(e: crate::Error) -> coguide_autodiff::AutodiffError {
    match e {
        crate::Error::Autodiff(inner) => inner,
        other => coguide_autodiff::AutodiffError::Invalid { op: "grad suite", msg: other.to_string() },
    }
}

/// Runs every component check and the end-to-end objective check.
pub fn run_grad_suite(spec: &GradSuiteSpec, tol: Tolerance) -> Result<GradSuiteReport> {
    let (model, store) = CoGuidingNet::init::<f64>(spec.model_config(), spec.seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed.wrapping_add(1));
    let n = spec.tokens;
    let d = spec.dim;
    let token_ids: Vec<usize> = (0..n).map(|i| (i * 3 + 1) % spec.vocab_size).collect();
    let enc_dim = model.encoder.output_dim();
    let mut checks = Vec::new();
    let mut run = |name: &str, recipe: &dyn Fn(&mut Session<'_, f64>) -> Result<Var>| -> Result<()> {
        let mut local: ParamStore<f64> = store.clone();
        let report = grad_check(&mut local, tol, |s| recipe(s).map_err(to_ad))?;
        checks.push((name.to_string(), report));
        Ok(())
    };

    let w = random(n, enc_dim, &mut rng);
    run("encoder", &|s| {
        let h = model.encoder.encode(s, &token_ids)?.states;
        Ok(probe(s, h, &w)?)
    })?;

    let input = random(n, enc_dim, &mut rng);
    let w = random(n, d, &mut rng);
    run("stage1.intent_lstm", &|s| {
        let x = s.tape.constant(input.clone());
        let h = model.stage1.intent_features(s, x)?;
        Ok(probe(s, h, &w)?)
    })?;
    run("stage1.slot_lstm", &|s| {
        let x = s.tape.constant(input.clone());
        let h = model.stage1.slot_features(s, x)?;
        Ok(probe(s, h, &w)?)
    })?;

    let feats = random(n, d, &mut rng);
    let wi = random(n, spec.intents, &mut rng);
    let ws = random(n, spec.slots, &mut rng);
    run("stage1.heads", &|s| {
        let x = s.tape.constant(feats.clone());
        let i = model.stage1.intent_head.forward(s, x)?;
        let sl = model.stage1.slot_head.forward(s, x)?;
        let a = probe(s, i, &wi)?;
        let b = probe(s, sl, &ws)?;
        Ok(s.tape.add(a, b)?)
    })?;
    run("stage2.heads", &|s| {
        let x = s.tape.constant(feats.clone());
        let i = model.stage2.intent_head.forward(s, x)?;
        let sl = model.stage2.slot_head.forward(s, x)?;
        let a = probe(s, i, &wi)?;
        let b = probe(s, sl, &ws)?;
        Ok(s.tape.add(a, b)?)
    })?;

    let probs = random(n, spec.intents, &mut rng);
    let w = random(n, d, &mut rng);
    run("stage2.intent_aware_lstm", &|s| {
        let p = s.tape.constant(probs.clone());
        let x = s.tape.constant(feats.clone());
        let h = model.stage2.intent_aware_bilstm(s, p, x)?;
        Ok(probe(s, h, &w)?)
    })?;

    let g = model.stage2.s2i_graph(n)?;
    let nodes = random(2 * n, d, &mut rng);
    let w = random(2 * n, d, &mut rng);
    run("stage2.s2i_hgat", &|s| {
        let x = s.tape.constant(nodes.clone());
        let h = model.stage2.s2i.forward(s, x, &g)?;
        Ok(probe(s, h, &w)?)
    })?;

    let m = spec.intents.min(2);
    let g = model.stage2.i2s_graph(n, m)?;
    let nodes = random(n + m, d, &mut rng);
    let w = random(n + m, d, &mut rng);
    run("stage2.i2s_hgat", &|s| {
        let x = s.tape.constant(nodes.clone());
        let h = model.stage2.i2s.forward(s, x, &g)?;
        Ok(probe(s, h, &w)?)
    })?;

    let example = EncodedUtterance {
        token_ids: token_ids.clone(),
        slot_ids: (0..n).map(|i| (i * 2) % spec.slots).collect(),
        intent_multihot: (0..spec.intents).map(|k| k % 2 == 0).collect(),
    };
    let fixed = Selections { intents: (0..m).collect(), slots: (0..n).map(|i| (i + 1) % spec.slots).collect() };
    let weights = LossWeights { gamma: 0.6, beta_intent: 0.5, beta_slot: 0.5 };
    run("objective", &|s| Ok(utterance_loss(&model, s, &example, &weights, Some(&fixed))?.0))?;

    Ok(GradSuiteReport { checks, tolerance: tol })
}
