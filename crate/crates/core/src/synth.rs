//! Seeded synthetic corpora with a built-in intent/slot correspondence.
//!
//! Every intent owns a few trigger words and one slot type; each intent in
//! an utterance contributes a clause made of an optional filler, one of its
//! triggers, an optional filler, and a 1-2 token span of its slot type.
//! Clauses are joined by `and`. Slot values come from a per-type word list,
//! except for a small pool of shared values whose type is only recoverable
//! from the clause's intent.

use std::collections::HashMap;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::Utterance;
use crate::{Error, Result};

const SHARED_VALUES: usize = 2;
const CONNECTIVE: &str = "and";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    /// Distinct surface tokens, including triggers, values, and fillers.
    pub vocab_size: usize,
    pub intents: usize,
    pub slot_types: usize,
    pub triggers_per_intent: usize,
    /// Words that can open a span of each type.
    pub values_per_type: usize,
    pub min_len: usize,
    pub max_len: usize,
    pub max_intents_per_utterance: usize,
    /// Probability that a slot value is drawn from the shared pool.
    pub shared_value_rate: f64,
    /// Probability of each optional filler word before and after a trigger.
    pub filler_rate: f64,
    /// Probability that a span continues with its type's tail word.
    pub tail_rate: f64,
    pub train: usize,
    pub dev: usize,
    pub test: usize,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            vocab_size: 40,
            intents: 4,
            slot_types: 4,
            triggers_per_intent: 2,
            values_per_type: 3,
            min_len: 3,
            max_len: 12,
            max_intents_per_utterance: 2,
            shared_value_rate: 0.1,
            filler_rate: 0.4,
            tail_rate: 0.3,
            train: 32,
            dev: 32,
            test: 32,
            seed: 7,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthCorpus {
    pub train: Vec<Utterance>,
    pub dev: Vec<Utterance>,
    pub test: Vec<Utterance>,
}

struct Lexicon {
    triggers: Vec<Vec<String>>,
    values: Vec<Vec<String>>,
    tails: Vec<String>,
    shared: Vec<String>,
    fillers: Vec<String>,
}

impl SynthSpec {
    fn structural_tokens(&self) -> usize {
        self.intents * self.triggers_per_intent + self.slot_types * (self.values_per_type + 1) + SHARED_VALUES + 1
    }

    fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if self.intents == 0 {
            return fail("synthetic corpus needs at least one intent".into());
        }
        if self.slot_types == 0 {
            return fail("synthetic corpus needs at least one slot type".into());
        }
        if self.triggers_per_intent == 0 || self.values_per_type == 0 {
            return fail("each intent needs a trigger and each slot type a value".into());
        }
        if self.max_intents_per_utterance == 0 {
            return fail("max_intents_per_utterance must be at least 1".into());
        }
        if self.min_len > self.max_len || self.max_len < 2 {
            return fail(format!("bad length range {}..={}", self.min_len, self.max_len));
        }
        if self.vocab_size < self.structural_tokens() + 2 {
            return fail(format!(
                "vocab_size {} too small; need at least {}",
                self.vocab_size,
                self.structural_tokens() + 2
            ));
        }
        for (name, p) in [
            ("shared_value_rate", self.shared_value_rate),
            ("filler_rate", self.filler_rate),
            ("tail_rate", self.tail_rate),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return fail(format!("{name} must be in [0, 1]"));
            }
        }
        Ok(())
    }

    fn lexicon(&self) -> Lexicon {
        Lexicon {
            triggers: (0..self.intents)
                .map(|j| (0..self.triggers_per_intent).map(|a| format!("trig{j}_{a}")).collect())
                .collect(),
            values: (0..self.slot_types)
                .map(|t| (0..self.values_per_type).map(|k| format!("val{t}_{k}")).collect())
                .collect(),
            tails: (0..self.slot_types).map(|t| format!("tail{t}")).collect(),
            shared: (0..SHARED_VALUES).map(|k| format!("shared{k}")).collect(),
            fillers: (0..self.vocab_size - self.structural_tokens())
                .map(|k| format!("w{k}"))
                .collect(),
        }
    }

    /// Slot type owned by an intent.
    pub fn slot_type_of(&self, intent: usize) -> usize {
        intent % self.slot_types
    }
}

pub fn intent_name(j: usize) -> String {
    format!("intent{j}")
}

pub fn slot_type_name(t: usize) -> String {
    format!("slot{t}")
}

pub fn generate_synthetic(spec: &SynthSpec) -> Result<SynthCorpus> {
    spec.validate()?;
    let lex = spec.lexicon();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut split = |n: usize| -> Vec<Utterance> {
        let mut usage = Usage::default();
        (0..n).map(|_| generate_one(spec, &lex, &mut usage, &mut rng)).collect()
    };
    let train = split(spec.train);
    let dev = split(spec.dev);
    let test = split(spec.test);
    Ok(SynthCorpus { train, dev, test })
}

/// How often each intent and word has been used so far in a split. Picks
/// favor the least used candidates, so even a small split covers the whole
/// lexicon about evenly.
#[derive(Default)]
struct Usage {
    counts: HashMap<String, usize>,
}

impl Usage {
    fn count(&self, key: &str) -> usize {
        self.counts.get(key).copied().unwrap_or(0)
    }

    fn least_used<'a, R: Rng>(&self, candidates: &'a [String], rng: &mut R) -> &'a String {
        let low = candidates.iter().map(|c| self.count(c)).min().expect("candidates");
        let ties: Vec<&String> = candidates.iter().filter(|c| self.count(c) == low).collect();
        ties.choose(rng).expect("at least one tie")
    }

    fn record<'a>(&mut self, keys: impl IntoIterator<Item = &'a String>) {
        for k in keys {
            *self.counts.entry(k.clone()).or_default() += 1;
        }
    }
}

fn generate_one(spec: &SynthSpec, lex: &Lexicon, usage: &mut Usage, rng: &mut ChaCha8Rng) -> Utterance {
    // Shortest clause is trigger + one value, plus a connective between clauses.
    let fits = |k: usize| 3 * k - 1 <= spec.max_len;
    let max_k = (1..=spec.max_intents_per_utterance.min(spec.intents))
        .rev()
        .find(|&k| fits(k))
        .unwrap_or(1);
    let mut k = rng.random_range(1..=max_k);
    let names: Vec<String> = (0..spec.intents).map(intent_name).collect();

    loop {
        let mut chosen: Vec<usize> = Vec::with_capacity(k);
        while chosen.len() < k {
            let left: Vec<String> = (0..spec.intents)
                .filter(|j| !chosen.contains(j))
                .map(intent_name)
                .collect();
            let pick = usage.least_used(&left, rng);
            chosen.push(names.iter().position(|n| n == pick).expect("known intent"));
        }
        chosen.shuffle(rng);

        let mut tokens: Vec<String> = Vec::new();
        let mut tags: Vec<String> = Vec::new();
        let mut push = |tokens: &mut Vec<String>, word: &String, tag: String| {
            tokens.push(word.clone());
            tags.push(tag);
        };
        // Words already placed in this utterance count as used.
        let mut local = Usage { counts: usage.counts.clone() };
        let word = |list: &[String], local: &mut Usage, rng: &mut ChaCha8Rng| {
            let w = local.least_used(list, rng).clone();
            local.record([&w]);
            w
        };
        for (c, &intent) in chosen.iter().enumerate() {
            if c > 0 {
                push(&mut tokens, &CONNECTIVE.to_string(), "O".into());
            }
            if rng.random_bool(spec.filler_rate) {
                let w = word(&lex.fillers, &mut local, rng);
                push(&mut tokens, &w, "O".into());
            }
            let w = word(&lex.triggers[intent], &mut local, rng);
            push(&mut tokens, &w, "O".into());
            if rng.random_bool(spec.filler_rate) {
                let w = word(&lex.fillers, &mut local, rng);
                push(&mut tokens, &w, "O".into());
            }
            let ty = spec.slot_type_of(intent);
            let head = if rng.random_bool(spec.shared_value_rate) {
                word(&lex.shared, &mut local, rng)
            } else {
                word(&lex.values[ty], &mut local, rng)
            };
            push(&mut tokens, &head, format!("B-{}", slot_type_name(ty)));
            if rng.random_bool(spec.tail_rate) {
                push(&mut tokens, &lex.tails[ty], format!("I-{}", slot_type_name(ty)));
            }
        }
        while tokens.len() < spec.min_len {
            let w = word(&lex.fillers, &mut local, rng);
            tokens.insert(0, w);
            tags.insert(0, "O".into());
        }
        if tokens.len() <= spec.max_len {
            let intents: Vec<String> = chosen.iter().map(|&j| intent_name(j)).collect();
            usage.record(&tokens);
            usage.record(&intents);
            return Utterance::new(tokens, tags, intents).expect("generator output is valid");
        }
        k = k.saturating_sub(1).max(1);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_degenerate_specs() {
        assert!(generate_synthetic(&SynthSpec { intents: 0, ..Default::default() }).is_err());
        assert!(generate_synthetic(&SynthSpec { vocab_size: 5, ..Default::default() }).is_err());
        assert!(generate_synthetic(&SynthSpec { min_len: 9, max_len: 4, ..Default::default() })
            .is_err());
    }

    #[test]
    fn lengths_and_intents_respect_spec() {
        let spec = SynthSpec { train: 300, min_len: 5, max_len: 9, ..Default::default() };
        let c = generate_synthetic(&spec).unwrap();
        for u in &c.train {
            assert!((5..=9).contains(&u.len()), "{:?}", u.tokens);
            assert!(!u.intents.is_empty() && u.intents.len() <= 2);
        }
    }
}
