//! Training and model configuration.
//!
//! Config files are flat `key = value` text; `#` starts a comment. Keys
//! are the field names of [`TrainConfig`].

use std::path::Path;

use coguide_autodiff::AdamConfig;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    /// Weight of the intent terms in the objective; slots get `1 - gamma`.
    pub gamma: f64,
    pub beta_intent: f64,
    pub beta_slot: f64,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_epsilon: f64,
    pub epochs: usize,
    /// Utterances whose gradients are accumulated per optimizer step.
    pub batch_size: usize,
    pub seed: u64,
    pub min_freq: usize,

    pub word_dim: usize,
    /// Encoder BiLSTM output width (both directions).
    pub lstm_dim: usize,
    pub attn_dim: usize,
    /// Task feature, graph node, and label embedding width.
    pub hidden_dim: usize,
    pub heads: usize,
    pub layers: usize,
    pub window: usize,
    pub leaky_slope: f64,
    pub vote_threshold: f64,
    /// Drop probability on word embeddings and encoder states during
    /// training. Zero disables it.
    pub dropout: f64,

    pub collapse_relations: bool,
    pub no_s2i_guidance: bool,
    pub no_i2s_guidance: bool,

    /// Evaluation threads; 0 picks the rayon default.
    pub workers: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self::desk()
    }
}

impl TrainConfig {
    /// Small dimensions for CPU-scale runs.
    pub fn desk() -> Self {
        Self {
            gamma: 0.9,
            beta_intent: 1e-6,
            beta_slot: 1.0,
            learning_rate: 1e-3,
            weight_decay: 1e-6,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_epsilon: 1e-8,
            epochs: 100,
            batch_size: 16,
            seed: 0,
            min_freq: 1,
            word_dim: 32,
            lstm_dim: 32,
            attn_dim: 32,
            hidden_dim: 32,
            heads: 4,
            layers: 2,
            window: 1,
            leaky_slope: 0.2,
            vote_threshold: 0.5,
            dropout: 0.0,
            collapse_relations: false,
            no_s2i_guidance: false,
            no_i2s_guidance: false,
            workers: 0,
        }
    }

    /// Full-size settings for MixATIS-scale corpora.
    pub fn full_scale() -> Self {
        Self { word_dim: 256, lstm_dim: 256, attn_dim: 256, hidden_dim: 256, ..Self::desk() }
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            learning_rate: self.learning_rate,
            weight_decay: self.weight_decay,
            beta1: self.adam_beta1,
            beta2: self.adam_beta2,
            epsilon: self.adam_epsilon,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if !(0.0..=1.0).contains(&self.gamma) {
            return fail(format!("gamma must be in [0, 1], got {}", self.gamma));
        }
        if self.beta_intent < 0.0 || self.beta_slot < 0.0 {
            return fail("margin coefficients must be nonnegative".into());
        }
        if self.learning_rate <= 0.0 || self.weight_decay < 0.0 {
            return fail("learning_rate must be positive and weight_decay nonnegative".into());
        }
        if self.epochs == 0 || self.batch_size == 0 || self.layers == 0 || self.heads == 0 {
            return fail("epochs, batch_size, layers and heads must be at least 1".into());
        }
        if !self.lstm_dim.is_multiple_of(2) || !self.hidden_dim.is_multiple_of(2) || self.lstm_dim == 0 {
            return fail("lstm_dim and hidden_dim must be even and positive".into());
        }
        if !self.hidden_dim.is_multiple_of(self.heads) {
            return fail(format!(
                "hidden_dim {} is not divisible by heads {}",
                self.hidden_dim, self.heads
            ));
        }
        if self.word_dim == 0 || self.attn_dim == 0 || self.hidden_dim == 0 {
            return fail("dimensions must be positive".into());
        }
        if !(self.vote_threshold > 0.0 && self.vote_threshold < 1.0) {
            return fail("vote_threshold must be in (0, 1)".into());
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return fail("dropout must be in [0, 1)".into());
        }
        if self.min_freq == 0 {
            return fail("min_freq must be at least 1".into());
        }
        Ok(())
    }

    /// Sets one field from its textual form.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
            value
                .parse()
                .map_err(|_| Error::Config(format!("bad value `{value}` for `{key}`")))
        }
        match key {
            "gamma" => self.gamma = num(key, value)?,
            "beta_intent" => self.beta_intent = num(key, value)?,
            "beta_slot" => self.beta_slot = num(key, value)?,
            "learning_rate" => self.learning_rate = num(key, value)?,
            "weight_decay" => self.weight_decay = num(key, value)?,
            "adam_beta1" => self.adam_beta1 = num(key, value)?,
            "adam_beta2" => self.adam_beta2 = num(key, value)?,
            "adam_epsilon" => self.adam_epsilon = num(key, value)?,
            "epochs" => self.epochs = num(key, value)?,
            "batch_size" => self.batch_size = num(key, value)?,
            "seed" => self.seed = num(key, value)?,
            "min_freq" => self.min_freq = num(key, value)?,
            "word_dim" => self.word_dim = num(key, value)?,
            "lstm_dim" => self.lstm_dim = num(key, value)?,
            "attn_dim" => self.attn_dim = num(key, value)?,
            "hidden_dim" => self.hidden_dim = num(key, value)?,
            "heads" => self.heads = num(key, value)?,
            "layers" => self.layers = num(key, value)?,
            "window" => self.window = num(key, value)?,
            "leaky_slope" => self.leaky_slope = num(key, value)?,
            "vote_threshold" => self.vote_threshold = num(key, value)?,
            "dropout" => self.dropout = num(key, value)?,
            "collapse_relations" => self.collapse_relations = num(key, value)?,
            "no_s2i_guidance" => self.no_s2i_guidance = num(key, value)?,
            "no_i2s_guidance" => self.no_i2s_guidance = num(key, value)?,
            "workers" => self.workers = num(key, value)?,
            _ => return Err(Error::Config(format!("unknown key `{key}`"))),
        }
        Ok(())
    }

    /// Applies `key = value` lines on top of `self`.
    pub fn apply_kv(&mut self, text: &str) -> Result<()> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::Parse {
                line: i + 1,
                msg: format!("expected `key = value`, got `{line}`"),
            })?;
            self.set(key.trim(), value.trim()).map_err(|e| Error::Parse {
                line: i + 1,
                msg: e.to_string(),
            })?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        self.apply_kv(&text)
    }

    pub fn to_kv(&self) -> String {
        let json = serde_json::to_value(self).expect("config serializes");
        let mut out = String::new();
        if let serde_json::Value::Object(map) = json {
            for (k, v) in map {
                out.push_str(&format!("{k} = {v}\n"));
            }
        }
        out
    }
}
