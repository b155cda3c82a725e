//! The full two-stage network.

use coguide_autodiff::{ParamStore, Real, Session, Tensor};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::TrainConfig;
use crate::corpus::Vocabulary;
use crate::encoder::{EncodedStates, Encoder};
use crate::stage1::{InitialEstimator, Stage1Output};
use crate::stage2::{GuidanceSwitches, GuidedDecoder, GuidedDecoderDims, Stage2Output};
use crate::{Error, Result};

/// Everything needed to rebuild the parameter layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub vocab_size: usize,
    pub intents: usize,
    pub slots: usize,
    pub word_dim: usize,
    pub lstm_dim: usize,
    pub attn_dim: usize,
    pub hidden_dim: usize,
    pub heads: usize,
    pub layers: usize,
    pub window: usize,
    pub leaky_slope: f64,
    pub vote_threshold: f64,
    pub dropout: f64,
    pub collapse_relations: bool,
    pub no_s2i_guidance: bool,
    pub no_i2s_guidance: bool,
}

impl ModelConfig {
    pub fn new(cfg: &TrainConfig, vocab: &Vocabulary) -> Self {
        Self {
            vocab_size: vocab.num_tokens(),
            intents: vocab.num_intents(),
            slots: vocab.num_slots(),
            word_dim: cfg.word_dim,
            lstm_dim: cfg.lstm_dim,
            attn_dim: cfg.attn_dim,
            hidden_dim: cfg.hidden_dim,
            heads: cfg.heads,
            layers: cfg.layers,
            window: cfg.window,
            leaky_slope: cfg.leaky_slope,
            vote_threshold: cfg.vote_threshold,
            dropout: cfg.dropout,
            collapse_relations: cfg.collapse_relations,
            no_s2i_guidance: cfg.no_s2i_guidance,
            no_i2s_guidance: cfg.no_i2s_guidance,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.intents == 0 || self.slots == 0 || self.vocab_size == 0 {
            return Err(Error::Config("model needs tokens, intents and slot labels".into()));
        }
        if !self.hidden_dim.is_multiple_of(self.heads) || !self.lstm_dim.is_multiple_of(2) || !self.hidden_dim.is_multiple_of(2) {
            return Err(Error::Config("inconsistent model dimensions".into()));
        }
        Ok(())
    }
}

/// Discrete first-pass choices, pinned so that a finite-difference probe
/// sees the same labels on every evaluation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Selections {
    pub intents: Vec<usize>,
    pub slots: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct ForwardOutput {
    pub encoded: EncodedStates,
    pub stage1: Stage1Output,
    pub stage2: Stage2Output,
}

impl ForwardOutput {
    pub fn selections(&self) -> Selections {
        Selections {
            intents: self.stage1.estimated_intents.clone(),
            slots: self.stage1.estimated_slots.clone(),
        }
    }
}

/// Both stages' distributions and decisions for one utterance.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionRecord<F> {
    pub intent_probs0: Tensor<F>,
    pub slot_probs0: Tensor<F>,
    pub intent_probs1: Tensor<F>,
    pub slot_probs1: Tensor<F>,
    pub intents0: Vec<usize>,
    pub slots0: Vec<usize>,
    pub intents: Vec<usize>,
    pub slots: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct CoGuidingNet {
    pub config: ModelConfig,
    pub encoder: Encoder,
    pub stage1: InitialEstimator,
    pub stage2: GuidedDecoder,
}

impl CoGuidingNet {
    /// Builds the layout and a freshly initialized parameter store.
    pub fn init<F: Real>(config: ModelConfig, seed: u64) -> Result<(Self, ParamStore<F>)> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut store = ParamStore::new();
        let c = &config;
        let encoder = Encoder::register(&mut store, c.vocab_size, c.word_dim, c.lstm_dim, c.attn_dim, &mut rng);
        let stage1 = InitialEstimator::register(
            &mut store,
            encoder.output_dim(),
            c.hidden_dim,
            c.intents,
            c.slots,
            c.leaky_slope,
            c.vote_threshold,
            &mut rng,
        );
        let dims = GuidedDecoderDims {
            dim: c.hidden_dim,
            intents: c.intents,
            slots: c.slots,
            heads: c.heads,
            layers: c.layers,
            window: c.window,
            slope: c.leaky_slope,
            vote_threshold: c.vote_threshold,
        };
        let switches = GuidanceSwitches {
            collapse_relations: c.collapse_relations,
            no_s2i_guidance: c.no_s2i_guidance,
            no_i2s_guidance: c.no_i2s_guidance,
        };
        let stage2 = GuidedDecoder::register(&mut store, &dims, switches, &mut rng);
        Ok((Self { config, encoder, stage1, stage2 }, store))
    }

    /// Encoder, first pass, then both guided branches. With `fixed`, the
    /// first-pass labels fed to the second pass are taken from it instead
    /// of from the first-pass distributions.
    pub fn forward_full<F: Real>(
        &self,
        s: &mut Session<'_, F>,
        token_ids: &[usize],
        fixed: Option<&Selections>,
    ) -> Result<ForwardOutput> {
        self.forward_inner(s, token_ids, fixed, None)
    }

    /// Training-mode pass: dropout at the configured rate, drawn from `rng`.
    pub fn forward_train<F: Real>(
        &self,
        s: &mut Session<'_, F>,
        token_ids: &[usize],
        rng: &mut dyn RngCore,
    ) -> Result<ForwardOutput> {
        self.forward_inner(s, token_ids, None, Some(rng))
    }

    fn forward_inner<F: Real>(
        &self,
        s: &mut Session<'_, F>,
        token_ids: &[usize],
        fixed: Option<&Selections>,
        rng: Option<&mut dyn RngCore>,
    ) -> Result<ForwardOutput> {
        if token_ids.is_empty() {
            return Err(Error::Empty("utterance"));
        }
        if let Some(&bad) = token_ids.iter().find(|&&t| t >= self.config.vocab_size) {
            return Err(Error::Contract(format!("token id {bad} outside vocabulary")));
        }
        let noise = rng.filter(|_| self.config.dropout > 0.0).map(|r| (self.config.dropout, r));
        let encoded = self.encoder.encode_noisy(s, token_ids, noise)?;
        let mut stage1 = self.stage1.forward(s, encoded.states)?;
        if let Some(sel) = fixed {
            if sel.slots.len() != token_ids.len() {
                return Err(Error::LengthMismatch("pinned slot selections".into()));
            }
            stage1.estimated_intents = sel.intents.clone();
            stage1.estimated_slots = sel.slots.clone();
        }
        let stage2 = self.stage2.forward(
            s,
            stage1.intent_features,
            stage1.slot_features,
            stage1.intent_probs,
            &stage1.estimated_intents,
            &stage1.estimated_slots,
        )?;
        Ok(ForwardOutput { encoded, stage1, stage2 })
    }

    pub fn predict<F: Real>(&self, params: &ParamStore<F>, token_ids: &[usize]) -> Result<PredictionRecord<F>> {
        let mut s = Session::new(params);
        let out = self.forward_full(&mut s, token_ids, None)?;
        let v = |var| s.tape.value(var).clone();
        Ok(PredictionRecord {
            intent_probs0: v(out.stage1.intent_probs),
            slot_probs0: v(out.stage1.slot_probs),
            intent_probs1: v(out.stage2.intent_probs),
            slot_probs1: v(out.stage2.slot_probs),
            intents0: out.stage1.estimated_intents,
            slots0: out.stage1.estimated_slots,
            intents: out.stage2.final_intents,
            slots: out.stage2.final_slots,
        })
    }
}
