//! Training objective: cross-entropy terms over both decoding passes plus
//! margin penalties that discourage the second pass from lowering the
//! probability of a gold label.

use coguide_autodiff::{Real, Tape, Tensor, Var};

use crate::config::TrainConfig;
use crate::{Error, Result};

/// Probabilities are clamped to `[EPSILON, 1 - EPSILON]` before logs.
pub const EPSILON: f64 = 1e-7;

/// The four objective terms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossParts<T> {
    pub intent: T,
    pub intent_margin: T,
    pub slot: T,
    pub slot_margin: T,
}

/// `gamma`, `beta_intent`, `beta_slot`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossWeights {
    pub gamma: f64,
    pub beta_intent: f64,
    pub beta_slot: f64,
}

impl From<&TrainConfig> for LossWeights {
    fn from(c: &TrainConfig) -> Self {
        Self { gamma: c.gamma, beta_intent: c.beta_intent, beta_slot: c.beta_slot }
    }
}

impl LossWeights {
    pub fn combine(&self, p: &LossParts<f64>) -> f64 {
        self.gamma * (p.intent + self.beta_intent * p.intent_margin)
            + (1.0 - self.gamma) * (p.slot + self.beta_slot * p.slot_margin)
    }
}

fn check_shape<F: Real>(tape: &Tape<F>, a: Var, b: Var, what: &str) -> Result<(usize, usize)> {
    let (sa, sb) = (tape.shape(a), tape.shape(b));
    if sa != sb {
        return Err(Error::Contract(format!("{what}: stage shapes {sa:?} and {sb:?} differ")));
    }
    Ok(sa)
}

/// `n x N_I` target: the utterance's multi-hot intent vector on every row.
pub fn intent_targets<F: Real>(n: usize, multihot: &[bool]) -> Tensor<F> {
    let row: Vec<F> = multihot.iter().map(|&b| if b { F::one() } else { F::zero() }).collect();
    let data = row.iter().copied().cycle().take(n * row.len()).collect();
    Tensor::new(n, row.len(), data).expect("shape matches data")
}

/// `n x N_S` one-hot rows of the gold tags.
pub fn slot_targets<F: Real>(gold: &[usize], slots: usize) -> Result<Tensor<F>> {
    let mut t = Tensor::zeros(gold.len(), slots);
    for (i, &g) in gold.iter().enumerate() {
        if g >= slots {
            return Err(Error::Contract(format!("gold tag id {g} outside {slots} labels")));
        }
        t.data_mut()[i * slots + g] = F::one();
    }
    Ok(t)
}

fn clamped_ln<F: Real>(tape: &mut Tape<F>, y: Var) -> Result<Var> {
    let eps = F::of(EPSILON);
    let c = tape.clamp(y, eps, F::one() - eps)?;
    Ok(tape.ln(c)?)
}

fn stage_bce<F: Real>(tape: &mut Tape<F>, y: Var, target: Var, complement: Var) -> Result<Var> {
    let eps = F::of(EPSILON);
    let c = tape.clamp(y, eps, F::one() - eps)?;
    let ln_y = tape.ln(c)?;
    let neg = tape.scale(c, -F::one())?;
    let one_minus = tape.add_scalar(neg, F::one())?;
    let ln_1m = tape.ln(one_minus)?;
    let pos = tape.mul(target, ln_y)?;
    let negs = tape.mul(complement, ln_1m)?;
    let ll = tape.add(pos, negs)?;
    let ll = tape.sum(ll)?;
    Ok(tape.scale(ll, -F::one())?)
}

/// Binary cross-entropy of both passes' token-level intent probabilities
/// against the utterance's intent set, summed over tokens and labels.
pub fn intent_loss<F: Real>(tape: &mut Tape<F>, y0: Var, y1: Var, gold: &[bool]) -> Result<Var> {
    let (n, labels) = check_shape(tape, y0, y1, "intent loss")?;
    if labels != gold.len() {
        return Err(Error::Contract(format!("{labels} intent columns, {} gold flags", gold.len())));
    }
    let t = intent_targets::<F>(n, gold);
    let complement = Tensor::new(n, labels, t.data().iter().map(|&v| F::one() - v).collect())?;
    let target = tape.constant(t);
    let complement = tape.constant(complement);
    let a = stage_bce(tape, y0, target, complement)?;
    let b = stage_bce(tape, y1, target, complement)?;
    Ok(tape.add(a, b)?)
}

/// Negative log-likelihood of the gold tags under both passes.
pub fn slot_loss<F: Real>(tape: &mut Tape<F>, y0: Var, y1: Var, gold: &[usize]) -> Result<Var> {
    let (n, slots) = check_shape(tape, y0, y1, "slot loss")?;
    if n != gold.len() {
        return Err(Error::LengthMismatch(format!("{n} slot rows, {} gold tags", gold.len())));
    }
    let mask = tape.constant(slot_targets(gold, slots)?);
    let mut total = None;
    for y in [y0, y1] {
        let ln = clamped_ln(tape, y)?;
        let picked = tape.mul(mask, ln)?;
        let s = tape.sum(picked)?;
        total = Some(match total {
            Some(t) => tape.sub(t, s)?,
            None => tape.scale(s, -F::one())?,
        });
    }
    Ok(total.expect("two stages"))
}

/// Sum of `max(0, y0 - y1)` over positions where `gold` is 1. `gold` has
/// the shape of the stage outputs.
pub fn margin_penalty<F: Real>(tape: &mut Tape<F>, y0: Var, y1: Var, gold: &Tensor<F>) -> Result<Var> {
    let shape = check_shape(tape, y0, y1, "margin penalty")?;
    if gold.shape() != shape {
        return Err(Error::Contract(format!("gold indicator {:?} vs outputs {shape:?}", gold.shape())));
    }
    let mask = tape.constant(gold.clone());
    let drop = tape.sub(y0, y1)?;
    let hinge = tape.relu(drop)?;
    let masked = tape.mul(mask, hinge)?;
    Ok(tape.sum(masked)?)
}

/// `gamma (L_I + beta_I mp_I) + (1 - gamma)(L_S + beta_S mp_S)`.
pub fn total_loss<F: Real>(tape: &mut Tape<F>, parts: &LossParts<Var>, w: &LossWeights) -> Result<Var> {
    let im = tape.scale(parts.intent_margin, F::of(w.beta_intent))?;
    let i = tape.add(parts.intent, im)?;
    let i = tape.scale(i, F::of(w.gamma))?;
    let sm = tape.scale(parts.slot_margin, F::of(w.beta_slot))?;
    let s = tape.add(parts.slot, sm)?;
    let s = tape.scale(s, F::of(1.0 - w.gamma))?;
    Ok(tape.add(i, s)?)
}

/// All four terms for one utterance from the two passes' outputs.
pub fn loss_parts<F: Real>(
    tape: &mut Tape<F>,
    intent_probs: (Var, Var),
    slot_probs: (Var, Var),
    gold_intents: &[bool],
    gold_slots: &[usize],
) -> Result<LossParts<Var>> {
    let (i0, i1) = intent_probs;
    let (s0, s1) = slot_probs;
    let n = tape.shape(i0).0;
    let intent = intent_loss(tape, i0, i1, gold_intents)?;
    let intent_margin = margin_penalty(tape, i0, i1, &intent_targets(n, gold_intents))?;
    let slot = slot_loss(tape, s0, s1, gold_slots)?;
    let slot_margin = margin_penalty(tape, s0, s1, &slot_targets(gold_slots, tape.shape(s0).1)?)?;
    Ok(LossParts { intent, intent_margin, slot, slot_margin })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tape_with(vals: &[(usize, usize, Vec<f64>)]) -> (Tape<f64>, Vec<Var>) {
        let mut tape = Tape::new();
        let vars = vals
            .iter()
            .map(|(r, c, v)| tape.leaf(Tensor::from_f64(*r, *c, v).unwrap()))
            .collect();
        (tape, vars)
    }

    fn scalar(tape: &Tape<f64>, v: Var) -> f64 {
        tape.value(v).data()[0]
    }

    #[test]
    fn half_probabilities_give_closed_form_bce() {
        let (n, k) = (3, 4);
        let (mut tape, v) = tape_with(&[(n, k, vec![0.5; n * k]), (n, k, vec![0.5; n * k])]);
        let l = intent_loss(&mut tape, v[0], v[1], &[true, false, true, false]).unwrap();
        let want = 2.0 * (n * k) as f64 * std::f64::consts::LN_2;
        assert!((scalar(&tape, l) - want).abs() < 1e-12);
    }

    #[test]
    fn perfect_intents_are_nearly_free() {
        let y = vec![1.0, 0.0, 1.0, 0.0];
        let (mut tape, v) = tape_with(&[(2, 2, y.clone()), (2, 2, y)]);
        let l = intent_loss(&mut tape, v[0], v[1], &[true, false]).unwrap();
        let got = scalar(&tape, l);
        assert!((0.0..1e-5).contains(&got), "{got}");
    }

    #[test]
    fn uniform_slots_give_closed_form_nll() {
        let (n, s) = (5, 7);
        let u = vec![1.0 / s as f64; n * s];
        let (mut tape, v) = tape_with(&[(n, s, u.clone()), (n, s, u)]);
        let l = slot_loss(&mut tape, v[0], v[1], &[0, 3, 6, 2, 2]).unwrap();
        let want = 2.0 * n as f64 * (s as f64).ln();
        assert!((scalar(&tape, l) - want).abs() < 1e-12);
    }

    #[test]
    fn margin_counts_only_gold_drops() {
        let (mut tape, v) = tape_with(&[(1, 2, vec![0.9, 0.8]), (1, 2, vec![0.7, 0.1])]);
        let gold = Tensor::from_f64(1, 2, &[1.0, 0.0]).unwrap();
        let m = margin_penalty(&mut tape, v[0], v[1], &gold).unwrap();
        assert!((scalar(&tape, m) - 0.2).abs() < 1e-12);
    }

    #[test]
    fn combine_matches_tape_version() {
        let w = LossWeights { gamma: 0.9, beta_intent: 1e-6, beta_slot: 1.0 };
        let p = LossParts { intent: 1.0, intent_margin: 0.5, slot: 2.0, slot_margin: 0.1 };
        let (mut tape, v) = tape_with(&[
            (1, 1, vec![p.intent]),
            (1, 1, vec![p.intent_margin]),
            (1, 1, vec![p.slot]),
            (1, 1, vec![p.slot_margin]),
        ]);
        let parts = LossParts { intent: v[0], intent_margin: v[1], slot: v[2], slot_margin: v[3] };
        let l = total_loss(&mut tape, &parts, &w).unwrap();
        assert!((scalar(&tape, l) - w.combine(&p)).abs() < 1e-15);
    }
}
