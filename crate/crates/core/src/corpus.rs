//! Corpus files, vocabularies, and id encoding.
//!
//! A corpus is UTF-8 text made of blocks separated by a blank line. Each
//! block holds one `token tag` line per token followed by a single line of
//! intent labels joined by `#`:
//!
//! ```text
//! listen B-action
//! to O
//! rock B-genre
//! PlayMusic
//! ```

use std::collections::{BTreeSet, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub const PAD: &str = "<pad>";
pub const UNK: &str = "<unk>";
pub const PAD_ID: usize = 0;
pub const UNK_ID: usize = 1;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Utterance {
    pub tokens: Vec<String>,
    pub slot_tags: Vec<String>,
    /// Sorted, duplicate-free, non-empty.
    pub intents: Vec<String>,
}

impl Utterance {
    pub fn new(tokens: Vec<String>, slot_tags: Vec<String>, intents: Vec<String>) -> Result<Self> {
        if tokens.is_empty() {
            return Err(Error::Utterance("no tokens".into()));
        }
        if tokens.len() != slot_tags.len() {
            return Err(Error::Utterance(format!(
                "{} tokens but {} slot tags",
                tokens.len(),
                slot_tags.len()
            )));
        }
        if let Some(t) = tokens.iter().find(|t| t.is_empty() || t.contains(char::is_whitespace)) {
            return Err(Error::Utterance(format!("invalid token `{t}`")));
        }
        if let Some(t) = slot_tags.iter().find(|t| !is_valid_tag(t)) {
            return Err(Error::Utterance(format!("invalid slot tag `{t}`")));
        }
        let intents: BTreeSet<String> = intents.into_iter().collect();
        if intents.is_empty() {
            return Err(Error::Utterance("no intents".into()));
        }
        if let Some(i) = intents
            .iter()
            .find(|i| i.is_empty() || i.contains('#') || i.contains(char::is_whitespace))
        {
            return Err(Error::Utterance(format!("invalid intent label `{i}`")));
        }
        Ok(Self { tokens, slot_tags, intents: intents.into_iter().collect() })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

/// `O`, `B-<type>`, or `I-<type>` with a non-empty type.
pub fn is_valid_tag(tag: &str) -> bool {
    tag == "O"
        || ((tag.starts_with("B-") || tag.starts_with("I-"))
            && tag.len() > 2
            && !tag.contains(char::is_whitespace))
}

/// True when no `I-X` follows anything other than `B-X` or `I-X`.
pub fn is_well_formed_bio(tags: &[String]) -> bool {
    let mut prev: Option<&str> = None;
    for tag in tags {
        if let Some(ty) = tag.strip_prefix("I-") {
            let continues = prev
                .and_then(|p| p.strip_prefix("B-").or_else(|| p.strip_prefix("I-")))
                .is_some_and(|p| p == ty);
            if !continues {
                return false;
            }
        }
        prev = Some(tag);
    }
    true
}

pub fn parse_corpus(path: &Path) -> Result<Vec<Utterance>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_str(&text)
}

pub fn parse_str(text: &str) -> Result<Vec<Utterance>> {
    let text = text.replace("\r\n", "\n");
    let lines: Vec<&str> = text.split('\n').collect();
    let last_content = lines.iter().rposition(|l| !l.trim().is_empty());
    let Some(last_content) = last_content else {
        return Ok(Vec::new());
    };

    let mut out = Vec::new();
    let mut block: Vec<(usize, &str)> = Vec::new();
    for (i, line) in lines[..=last_content].iter().enumerate() {
        let line_no = i + 1;
        if line.trim().is_empty() {
            if block.is_empty() {
                return Err(Error::Parse { line: line_no, msg: "empty block".into() });
            }
            out.push(parse_block(&block)?);
            block.clear();
        } else {
            block.push((line_no, line.trim_end()));
        }
    }
    if !block.is_empty() {
        out.push(parse_block(&block)?);
    }
    Ok(out)
}

fn parse_block(block: &[(usize, &str)]) -> Result<Utterance> {
    let (&(intent_line_no, intent_line), token_lines) = block.split_last().expect("non-empty");
    let intent_fields: Vec<&str> = intent_line.split_whitespace().collect();
    if intent_fields.len() != 1 {
        return Err(Error::Parse {
            line: intent_line_no,
            msg: format!("missing intent line (found `{intent_line}`)"),
        });
    }
    if token_lines.is_empty() {
        return Err(Error::Parse { line: intent_line_no, msg: "empty block: no tokens".into() });
    }
    let mut tokens = Vec::with_capacity(token_lines.len());
    let mut tags = Vec::with_capacity(token_lines.len());
    for &(line_no, line) in token_lines {
        let fields: Vec<&str> = line.split_whitespace().collect();
        let [token, tag] = fields[..] else {
            return Err(Error::Parse {
                line: line_no,
                msg: format!("expected `token tag`, got {} fields", fields.len()),
            });
        };
        if !is_valid_tag(tag) {
            return Err(Error::Parse { line: line_no, msg: format!("invalid slot tag `{tag}`") });
        }
        tokens.push(token.to_string());
        tags.push(tag.to_string());
    }
    let intents = intent_fields[0].split('#').map(str::to_string).collect();
    Utterance::new(tokens, tags, intents).map_err(|e| Error::Parse {
        line: intent_line_no,
        msg: e.to_string(),
    })
}

/// Inverse of [`parse_str`].
pub fn serialize(corpus: &[Utterance]) -> String {
    let mut out = String::new();
    for (k, u) in corpus.iter().enumerate() {
        if k > 0 {
            out.push('\n');
        }
        for (t, g) in u.tokens.iter().zip(&u.slot_tags) {
            out.push_str(t);
            out.push(' ');
            out.push_str(g);
            out.push('\n');
        }
        out.push_str(&u.intents.join("#"));
        out.push('\n');
    }
    out
}

pub fn write_corpus(path: &Path, corpus: &[Utterance]) -> Result<()> {
    std::fs::write(path, serialize(corpus)).map_err(|e| Error::io(path, e))
}

/// Reads unlabeled input: blocks separated by blank lines, one token per
/// line. Labeled corpus blocks are accepted too; their tags and intent
/// line are ignored.
pub fn parse_tokens(text: &str) -> Vec<Vec<String>> {
    let text = text.replace("\r\n", "\n");
    let mut out = Vec::new();
    for block in text.split("\n\n") {
        let lines: Vec<&str> = block.lines().filter(|l| !l.trim().is_empty()).collect();
        if lines.is_empty() {
            continue;
        }
        let labeled = lines.iter().any(|l| l.split_whitespace().count() >= 2);
        let token_lines = if labeled { &lines[..lines.len() - 1] } else { &lines[..] };
        let tokens: Vec<String> = token_lines
            .iter()
            .filter_map(|l| l.split_whitespace().next().map(str::to_string))
            .collect();
        if !tokens.is_empty() {
            out.push(tokens);
        }
    }
    out
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct VocabLists {
    tokens: Vec<String>,
    slots: Vec<String>,
    intents: Vec<String>,
}

/// Dense id maps for tokens, slot tags, and intents. Token ids 0 and 1 are
/// reserved for padding and unknown tokens.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "VocabLists", into = "VocabLists")]
pub struct Vocabulary {
    tokens: Vec<String>,
    slots: Vec<String>,
    intents: Vec<String>,
    token_ids: HashMap<String, usize>,
    slot_ids: HashMap<String, usize>,
    intent_ids: HashMap<String, usize>,
}

impl From<VocabLists> for Vocabulary {
    fn from(l: VocabLists) -> Self {
        let index = |v: &[String]| v.iter().enumerate().map(|(i, s)| (s.clone(), i)).collect();
        Self {
            token_ids: index(&l.tokens),
            slot_ids: index(&l.slots),
            intent_ids: index(&l.intents),
            tokens: l.tokens,
            slots: l.slots,
            intents: l.intents,
        }
    }
}

impl From<Vocabulary> for VocabLists {
    fn from(v: Vocabulary) -> Self {
        Self { tokens: v.tokens, slots: v.slots, intents: v.intents }
    }
}

/// Sorted by descending count, then lexicographically.
fn ranked<'a>(items: impl Iterator<Item = &'a String>, min_count: usize) -> Vec<String> {
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for s in items {
        *counts.entry(s.as_str()).or_default() += 1;
    }
    let mut v: Vec<(&str, usize)> = counts.into_iter().filter(|&(_, c)| c >= min_count).collect();
    v.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    v.into_iter().map(|(s, _)| s.to_string()).collect()
}

pub fn build_vocab(train: &[Utterance], min_freq: usize) -> Result<Vocabulary> {
    if train.is_empty() {
        return Err(Error::Empty("training corpus"));
    }
    let mut tokens = vec![PAD.to_string(), UNK.to_string()];
    tokens.extend(
        ranked(train.iter().flat_map(|u| &u.tokens), min_freq.max(1))
            .into_iter()
            .filter(|t| t != PAD && t != UNK),
    );
    let slots = ranked(train.iter().flat_map(|u| &u.slot_tags), 1);
    let intents = ranked(train.iter().flat_map(|u| &u.intents), 1);
    Ok(VocabLists { tokens, slots, intents }.into())
}

/// What `encode` does with a gold label missing from the vocabulary.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnknownLabels {
    Error,
    Skip,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncodedUtterance {
    pub token_ids: Vec<usize>,
    pub slot_ids: Vec<usize>,
    pub intent_multihot: Vec<bool>,
}

impl EncodedUtterance {
    pub fn len(&self) -> usize {
        self.token_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.token_ids.is_empty()
    }

    pub fn intent_ids(&self) -> Vec<usize> {
        self.intent_multihot
            .iter()
            .enumerate()
            .filter_map(|(i, &on)| on.then_some(i))
            .collect()
    }
}

impl Vocabulary {
    pub fn num_tokens(&self) -> usize {
        self.tokens.len()
    }

    pub fn num_slots(&self) -> usize {
        self.slots.len()
    }

    pub fn num_intents(&self) -> usize {
        self.intents.len()
    }

    pub fn token_id(&self, token: &str) -> usize {
        self.token_ids.get(token).copied().unwrap_or(UNK_ID)
    }

    pub fn slot_id(&self, tag: &str) -> Option<usize> {
        self.slot_ids.get(tag).copied()
    }

    pub fn intent_id(&self, intent: &str) -> Option<usize> {
        self.intent_ids.get(intent).copied()
    }

    pub fn token(&self, id: usize) -> &str {
        &self.tokens[id]
    }

    pub fn slot(&self, id: usize) -> &str {
        &self.slots[id]
    }

    pub fn intent(&self, id: usize) -> &str {
        &self.intents[id]
    }

    pub fn encode_tokens(&self, tokens: &[String]) -> Vec<usize> {
        tokens.iter().map(|t| self.token_id(t)).collect()
    }

    /// `Ok(None)` only in [`UnknownLabels::Skip`] mode, after a warning.
    pub fn encode(&self, u: &Utterance, unknown: UnknownLabels) -> Result<Option<EncodedUtterance>> {
        let missing = u
            .slot_tags
            .iter()
            .find(|t| self.slot_id(t).is_none())
            .map(|t| ("slot", t))
            .or_else(|| u.intents.iter().find(|i| self.intent_id(i).is_none()).map(|i| ("intent", i)));
        if let Some((kind, label)) = missing {
            return match unknown {
                UnknownLabels::Error => {
                    Err(Error::UnknownLabel { kind, label: label.clone() })
                }
                UnknownLabels::Skip => {
                    log::warn!("skipping utterance with unknown {kind} label `{label}`");
                    Ok(None)
                }
            };
        }
        let mut intent_multihot = vec![false; self.num_intents()];
        for i in &u.intents {
            intent_multihot[self.intent_ids[i]] = true;
        }
        Ok(Some(EncodedUtterance {
            token_ids: self.encode_tokens(&u.tokens),
            slot_ids: u.slot_tags.iter().map(|t| self.slot_ids[t]).collect(),
            intent_multihot,
        }))
    }

    pub fn encode_all(&self, corpus: &[Utterance], unknown: UnknownLabels) -> Result<Vec<EncodedUtterance>> {
        let mut out = Vec::with_capacity(corpus.len());
        for u in corpus {
            if let Some(e) = self.encode(u, unknown)? {
                out.push(e);
            }
        }
        Ok(out)
    }
}
