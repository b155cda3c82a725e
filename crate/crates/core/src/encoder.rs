//! Shared self-attentive encoder: a BiLSTM and a single-head scaled
//! dot-product self-attention, both reading the word embeddings, with their
//! outputs concatenated per token.

use coguide_autodiff::{Init, ParamId, ParamStore, Real, Session, Var};
use rand::{Rng, RngCore};

use crate::layers::{dropout, BiLstm, Linear};
use crate::Result;

#[derive(Debug, Clone)]
pub struct SelfAttention {
    pub query: Linear,
    pub key: Linear,
    pub value: Linear,
    pub dim: usize,
}

impl SelfAttention {
    pub fn register<F: Real, R: Rng + ?Sized>(
        store: &mut ParamStore<F>,
        name: &str,
        input: usize,
        dim: usize,
        rng: &mut R,
    ) -> Self {
        Self {
            query: Linear::register(store, &format!("{name}.query"), input, dim, false, rng),
            key: Linear::register(store, &format!("{name}.key"), input, dim, false, rng),
            value: Linear::register(store, &format!("{name}.value"), input, dim, false, rng),
            dim,
        }
    }

    /// Returns `(output, attention weights)`, shapes `n x dim` and `n x n`.
    pub fn forward<F: Real>(&self, s: &mut Session<'_, F>, x: Var) -> Result<(Var, Var)> {
        let q = self.query.forward(s, x)?;
        let k = self.key.forward(s, x)?;
        let v = self.value.forward(s, x)?;
        let scores = s.tape.matmul_nt(q, k)?;
        let scores = s.tape.scale(scores, F::of(1.0 / (self.dim as f64).sqrt()))?;
        let weights = s.tape.softmax(scores)?;
        let out = s.tape.matmul(weights, v)?;
        Ok((out, weights))
    }
}

#[derive(Debug, Clone, Copy)]
pub struct EncodedStates {
    /// `n x (lstm_dim + attn_dim)`.
    pub states: Var,
    /// Self-attention weights, `n x n`.
    pub attention: Var,
}

#[derive(Debug, Clone)]
pub struct Encoder {
    pub embedding: ParamId,
    pub lstm: BiLstm,
    pub attention: SelfAttention,
}

impl Encoder {
    pub fn register<F: Real, R: Rng + ?Sized>(
        store: &mut ParamStore<F>,
        vocab_size: usize,
        word_dim: usize,
        lstm_dim: usize,
        attn_dim: usize,
        rng: &mut R,
    ) -> Self {
        Self {
            embedding: store.register("encoder.embedding", vocab_size, word_dim, Init::Normal(0.1), rng),
            lstm: BiLstm::register(store, "encoder.lstm", word_dim, lstm_dim, rng),
            attention: SelfAttention::register(store, "encoder.attention", word_dim, attn_dim, rng),
        }
    }

    pub fn output_dim(&self) -> usize {
        self.lstm.output_dim + self.attention.dim
    }

    pub fn encode<F: Real>(&self, s: &mut Session<'_, F>, token_ids: &[usize]) -> Result<EncodedStates> {
        self.encode_noisy(s, token_ids, None)
    }

    /// With `noise = Some((p, rng))`, applies dropout with rate `p` to the
    /// word vectors and to the encoder states.
    pub fn encode_noisy<F: Real>(
        &self,
        s: &mut Session<'_, F>,
        token_ids: &[usize],
        mut noise: Option<(f64, &mut dyn RngCore)>,
    ) -> Result<EncodedStates> {
        let table = s.param(self.embedding);
        let mut words = s.tape.embedding(table, token_ids)?;
        if let Some((p, rng)) = noise.as_mut() {
            words = dropout(s, words, *p, rng)?;
        }
        let recurrent = self.lstm.forward(s, words)?;
        let (global, attention) = self.attention.forward(s, words)?;
        let mut states = s.tape.concat_cols(&[recurrent, global])?;
        if let Some((p, rng)) = noise.as_mut() {
            states = dropout(s, states, *p, rng)?;
        }
        Ok(EncodedStates { states, attention })
    }
}
