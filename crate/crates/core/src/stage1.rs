//! Initial estimation: task-specific BiLSTMs, token-level intent and slot
//! distributions, and the discrete first-pass labels.

use coguide_autodiff::{ParamStore, Real, Session, Tensor, Var};
use rand::Rng;

use crate::layers::{BiLstm, MlpHead};
use crate::Result;

/// Token-level multi-label intent probabilities (sigmoid outputs).
#[derive(Debug, Clone)]
pub struct IntentHead(pub MlpHead);

/// Token-level slot label distributions (softmax outputs).
#[derive(Debug, Clone)]
pub struct SlotHead(pub MlpHead);

impl IntentHead {
    pub fn register<F: Real, R: Rng + ?Sized>(
        store: &mut ParamStore<F>,
        name: &str,
        dim: usize,
        intents: usize,
        slope: f64,
        rng: &mut R,
    ) -> Self {
        Self(MlpHead::register(store, name, dim, intents, slope, rng))
    }

    pub fn forward<F: Real>(&self, s: &mut Session<'_, F>, h: Var) -> Result<Var> {
        let z = self.0.logits(s, h)?;
        Ok(s.tape.sigmoid(z)?)
    }
}

impl SlotHead {
    pub fn register<F: Real, R: Rng + ?Sized>(
        store: &mut ParamStore<F>,
        name: &str,
        dim: usize,
        slots: usize,
        slope: f64,
        rng: &mut R,
    ) -> Self {
        Self(MlpHead::register(store, name, dim, slots, slope, rng))
    }

    pub fn forward<F: Real>(&self, s: &mut Session<'_, F>, h: Var) -> Result<Var> {
        let z = self.0.logits(s, h)?;
        Ok(s.tape.softmax(z)?)
    }
}

/// Sentence-level intents by token majority vote.
///
/// Intent `l` is selected when strictly more than half of the tokens give
/// it probability at least `threshold`. If nothing is selected, the single
/// intent with the most token hits wins; ties go to the higher mean
/// probability, then the lower id. Result is sorted by id and never empty
/// for `n >= 1`.
pub fn intent_voting<F: Real>(probs: &Tensor<F>, threshold: f64) -> Vec<usize> {
    let (n, labels) = probs.shape();
    if n == 0 || labels == 0 {
        return Vec::new();
    }
    let threshold = F::of(threshold);
    let hits: Vec<usize> = (0..labels)
        .map(|l| (0..n).filter(|&i| probs.get(i, l) >= threshold).count())
        .collect();
    let voted: Vec<usize> = (0..labels).filter(|&l| 2 * hits[l] > n).collect();
    if !voted.is_empty() {
        return voted;
    }
    let mean = |l: usize| (0..n).map(|i| probs.get(i, l).as_f64()).sum::<f64>() / n as f64;
    let mut best = 0;
    for l in 1..labels {
        let better = hits[l] > hits[best] || (hits[l] == hits[best] && mean(l) > mean(best));
        if better {
            best = l;
        }
    }
    vec![best]
}

/// Row-wise argmax; ties resolve to the lowest label id.
pub fn slot_argmax<F: Real>(probs: &Tensor<F>) -> Vec<usize> {
    (0..probs.rows())
        .map(|i| {
            let row = probs.row_slice(i);
            let mut best = 0;
            for (j, &v) in row.iter().enumerate().skip(1) {
                if v > row[best] {
                    best = j;
                }
            }
            best
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct Stage1Output {
    /// `n x d` intent features.
    pub intent_features: Var,
    /// `n x d` slot features.
    pub slot_features: Var,
    /// `n x N_I` token-level intent probabilities.
    pub intent_probs: Var,
    /// `n x N_S` token-level slot distributions.
    pub slot_probs: Var,
    pub estimated_intents: Vec<usize>,
    pub estimated_slots: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct InitialEstimator {
    pub intent_lstm: BiLstm,
    pub slot_lstm: BiLstm,
    pub intent_head: IntentHead,
    pub slot_head: SlotHead,
    pub vote_threshold: f64,
}

impl InitialEstimator {
    #[allow(clippy::too_many_arguments)]
    pub fn register<F: Real, R: Rng + ?Sized>(
        store: &mut ParamStore<F>,
        input: usize,
        dim: usize,
        intents: usize,
        slots: usize,
        slope: f64,
        vote_threshold: f64,
        rng: &mut R,
    ) -> Self {
        Self {
            intent_lstm: BiLstm::register(store, "stage1.intent_lstm", input, dim, rng),
            slot_lstm: BiLstm::register(store, "stage1.slot_lstm", input, dim, rng),
            intent_head: IntentHead::register(store, "stage1.intent_head", dim, intents, slope, rng),
            slot_head: SlotHead::register(store, "stage1.slot_head", dim, slots, slope, rng),
            vote_threshold,
        }
    }

    pub fn intent_features<F: Real>(&self, s: &mut Session<'_, F>, h: Var) -> Result<Var> {
        self.intent_lstm.forward(s, h)
    }

    pub fn slot_features<F: Real>(&self, s: &mut Session<'_, F>, h: Var) -> Result<Var> {
        self.slot_lstm.forward(s, h)
    }

    pub fn forward<F: Real>(&self, s: &mut Session<'_, F>, h: Var) -> Result<Stage1Output> {
        let intent_features = self.intent_features(s, h)?;
        let intent_probs = self.intent_head.forward(s, intent_features)?;
        let slot_features = self.slot_features(s, h)?;
        let slot_probs = self.slot_head.forward(s, slot_features)?;
        let estimated_intents = intent_voting(s.tape.value(intent_probs), self.vote_threshold);
        let estimated_slots = slot_argmax(s.tape.value(slot_probs));
        Ok(Stage1Output {
            intent_features,
            slot_features,
            intent_probs,
            slot_probs,
            estimated_intents,
            estimated_slots,
        })
    }
}
