//! Intent accuracy, span-level slot F1, and overall (frame) accuracy.

use std::collections::HashSet;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// A labeled span: `start..end` (exclusive) of type `label`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Span {
    pub start: usize,
    pub end: usize,
    pub label: String,
}

/// Extracts spans from a BIO tag sequence. A span is a `B-X` followed by
/// any run of `I-X`. An `I-X` that does not continue an open `X` span
/// opens a new one, as if it were `B-X`. Malformed tags are treated as `O`.
pub fn extract_spans<S: AsRef<str>>(tags: &[S]) -> Vec<Span> {
    let mut spans = Vec::new();
    let mut open: Option<(usize, &str)> = None;
    for (i, tag) in tags.iter().enumerate() {
        let tag = tag.as_ref();
        let (prefix, label) = match tag.split_once('-') {
            Some((p @ ("B" | "I"), l)) if !l.is_empty() => (p, l),
            _ => ("O", ""),
        };
        let continues = prefix == "I" && matches!(open, Some((_, l)) if l == label);
        if continues {
            continue;
        }
        if let Some((start, l)) = open.take() {
            spans.push(Span { start, end: i, label: l.to_string() });
        }
        if prefix != "O" {
            open = Some((i, label));
        }
    }
    if let Some((start, l)) = open {
        spans.push(Span { start, end: tags.len(), label: l.to_string() });
    }
    spans
}

/// Micro-averaged span scores.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpanScores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub gold_spans: usize,
    pub pred_spans: usize,
    pub correct_spans: usize,
}

impl SpanScores {
    /// Scores from raw counts. With no spans on either side every score is
    /// 1; otherwise an empty denominator gives 0.
    pub fn from_counts(gold: usize, pred: usize, correct: usize) -> Self {
        let ratio = |num: usize, den: usize| if den == 0 { 0.0 } else { num as f64 / den as f64 };
        let (precision, recall, f1) = if gold == 0 && pred == 0 {
            (1.0, 1.0, 1.0)
        } else {
            let p = ratio(correct, pred);
            let r = ratio(correct, gold);
            let f = if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) };
            (p, r, f)
        };
        Self { precision, recall, f1, gold_spans: gold, pred_spans: pred, correct_spans: correct }
    }
}

fn check_lengths<A, B>(pred: &[A], gold: &[B], what: &str) -> Result<()> {
    if pred.len() != gold.len() {
        return Err(Error::LengthMismatch(format!(
            "{} predicted {what} vs {} gold",
            pred.len(),
            gold.len()
        )));
    }
    Ok(())
}

/// Span-level precision, recall and F1 over a corpus of tag sequences.
pub fn slot_span_f1<S: AsRef<str>>(pred: &[Vec<S>], gold: &[Vec<S>]) -> Result<SpanScores> {
    check_lengths(pred, gold, "sequences")?;
    let (mut g, mut p, mut c) = (0, 0, 0);
    for (i, (ps, gs)) in pred.iter().zip(gold).enumerate() {
        if ps.len() != gs.len() {
            return Err(Error::LengthMismatch(format!(
                "utterance {i}: {} predicted tags vs {} gold",
                ps.len(),
                gs.len()
            )));
        }
        let pred_spans = extract_spans(ps);
        let gold_spans: HashSet<Span> = extract_spans(gs).into_iter().collect();
        g += gold_spans.len();
        p += pred_spans.len();
        c += pred_spans.iter().filter(|s| gold_spans.contains(s)).count();
    }
    Ok(SpanScores::from_counts(g, p, c))
}

/// Token-level micro F1 over non-`O` tags. A diagnostic next to span F1.
pub fn slot_token_f1<S: AsRef<str>>(pred: &[Vec<S>], gold: &[Vec<S>]) -> Result<f64> {
    check_lengths(pred, gold, "sequences")?;
    let (mut g, mut p, mut c) = (0, 0, 0);
    for (ps, gs) in pred.iter().zip(gold) {
        check_lengths(ps, gs, "tags")?;
        for (a, b) in ps.iter().zip(gs) {
            let (a, b) = (a.as_ref(), b.as_ref());
            p += usize::from(a != "O");
            g += usize::from(b != "O");
            c += usize::from(a != "O" && a == b);
        }
    }
    Ok(SpanScores::from_counts(g, p, c).f1)
}

fn same_set<T: Ord + Clone>(a: &[T], b: &[T]) -> bool {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort();
    a.dedup();
    b.sort();
    b.dedup();
    a == b
}

/// Fraction of utterances whose predicted intent set equals the gold set.
pub fn intent_accuracy<T: Ord + Clone>(pred: &[Vec<T>], gold: &[Vec<T>]) -> Result<f64> {
    check_lengths(pred, gold, "intent sets")?;
    if pred.is_empty() {
        return Ok(0.0);
    }
    let hits = pred.iter().zip(gold).filter(|(p, g)| same_set(p, g)).count();
    Ok(hits as f64 / pred.len() as f64)
}

/// Predicted and gold labels of one utterance.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UtteranceOutcome {
    pub pred_intents: Vec<String>,
    pub gold_intents: Vec<String>,
    pub pred_tags: Vec<String>,
    pub gold_tags: Vec<String>,
}

impl UtteranceOutcome {
    pub fn intents_correct(&self) -> bool {
        same_set(&self.pred_intents, &self.gold_intents)
    }

    pub fn slots_correct(&self) -> bool {
        self.pred_tags == self.gold_tags
    }
}

/// Fraction of utterances with both the intent set and every tag right.
pub fn overall_accuracy(records: &[UtteranceOutcome]) -> f64 {
    if records.is_empty() {
        return 0.0;
    }
    let hits = records.iter().filter(|r| r.intents_correct() && r.slots_correct()).count();
    hits as f64 / records.len() as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub utterances: usize,
    pub intent_accuracy: f64,
    pub slot_precision: f64,
    pub slot_recall: f64,
    pub slot_f1: f64,
    pub slot_token_f1: f64,
    /// Fraction of utterances with every tag right.
    pub slot_exact: f64,
    pub overall_accuracy: f64,
    pub gold_spans: usize,
    pub pred_spans: usize,
    pub correct_spans: usize,
}

impl EvalReport {
    pub fn from_outcomes(records: &[UtteranceOutcome]) -> Result<Self> {
        let pred_i: Vec<_> = records.iter().map(|r| r.pred_intents.clone()).collect();
        let gold_i: Vec<_> = records.iter().map(|r| r.gold_intents.clone()).collect();
        let pred_t: Vec<_> = records.iter().map(|r| r.pred_tags.clone()).collect();
        let gold_t: Vec<_> = records.iter().map(|r| r.gold_tags.clone()).collect();
        let spans = slot_span_f1(&pred_t, &gold_t)?;
        let exact = if records.is_empty() {
            0.0
        } else {
            records.iter().filter(|r| r.slots_correct()).count() as f64 / records.len() as f64
        };
        Ok(Self {
            utterances: records.len(),
            intent_accuracy: intent_accuracy(&pred_i, &gold_i)?,
            slot_precision: spans.precision,
            slot_recall: spans.recall,
            slot_f1: spans.f1,
            slot_token_f1: slot_token_f1(&pred_t, &gold_t)?,
            slot_exact: exact,
            overall_accuracy: overall_accuracy(records),
            gold_spans: spans.gold_spans,
            pred_spans: spans.pred_spans,
            correct_spans: spans.correct_spans,
        })
    }

    fn rows(&self) -> Vec<(&'static str, String)> {
        let f = |x: f64| format!("{x:.4}");
        vec![
            ("utterances", self.utterances.to_string()),
            ("intent_accuracy", f(self.intent_accuracy)),
            ("slot_precision", f(self.slot_precision)),
            ("slot_recall", f(self.slot_recall)),
            ("slot_f1", f(self.slot_f1)),
            ("slot_token_f1", f(self.slot_token_f1)),
            ("slot_exact", f(self.slot_exact)),
            ("overall_accuracy", f(self.overall_accuracy)),
            ("gold_spans", self.gold_spans.to_string()),
            ("pred_spans", self.pred_spans.to_string()),
            ("correct_spans", self.correct_spans.to_string()),
        ]
    }

    /// Human-readable two-column table.
    pub fn to_table(&self) -> String {
        let rows = self.rows();
        let width = rows.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
        let mut out = String::new();
        for (k, v) in rows {
            let _ = writeln!(out, "{k:<width$}  {v:>10}");
        }
        out
    }

    /// `key=value` lines with full precision.
    pub fn to_kv(&self) -> String {
        let mut out = String::new();
        let mut put = |k: &str, v: String| {
            let _ = writeln!(out, "{k}={v}");
        };
        put("utterances", self.utterances.to_string());
        put("intent_accuracy", self.intent_accuracy.to_string());
        put("slot_precision", self.slot_precision.to_string());
        put("slot_recall", self.slot_recall.to_string());
        put("slot_f1", self.slot_f1.to_string());
        put("slot_token_f1", self.slot_token_f1.to_string());
        put("slot_exact", self.slot_exact.to_string());
        put("overall_accuracy", self.overall_accuracy.to_string());
        put("gold_spans", self.gold_spans.to_string());
        put("pred_spans", self.pred_spans.to_string());
        put("correct_spans", self.correct_spans.to_string());
        out
    }
}
