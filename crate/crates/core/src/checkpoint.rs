//! Binary checkpoint container.
//!
//! Layout: the 8-byte magic `COGUIDE\0`, a little-endian `u32` format
//! version, a little-endian `u64` header length, a JSON header, then every
//! parameter's values as little-endian `f32` in header order.

use std::fs;
use std::path::Path;

use coguide_autodiff::{ParamStore, Tensor};
use serde::{Deserialize, Serialize};

use crate::config::TrainConfig;
use crate::corpus::Vocabulary;
use crate::model::{CoGuidingNet, ModelConfig};
use crate::training::Trained;
use crate::{Error, Result};

pub const MAGIC: &[u8; 8] = b"COGUIDE\0";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ParamEntry {
    name: String,
    rows: usize,
    cols: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Header {
    format_version: u32,
    config: TrainConfig,
    vocab: Vocabulary,
    best_epoch: usize,
    params: Vec<ParamEntry>,
}

/// A trained model as restored from disk.
#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub config: TrainConfig,
    pub vocab: Vocabulary,
    pub model: CoGuidingNet,
    pub params: ParamStore<f32>,
    pub best_epoch: usize,
}

impl From<Trained> for Checkpoint {
    fn from(t: Trained) -> Self {
        Self { config: t.config, vocab: t.vocab, model: t.model, params: t.params, best_epoch: t.best_epoch }
    }
}

pub fn to_bytes(config: &TrainConfig, vocab: &Vocabulary, params: &ParamStore<f32>, best_epoch: usize) -> Result<Vec<u8>> {
    let header = Header {
        format_version: FORMAT_VERSION,
        config: config.clone(),
        vocab: vocab.clone(),
        best_epoch,
        params: params
            .iter()
            .map(|(_, p)| ParamEntry { name: p.name.clone(), rows: p.value.rows(), cols: p.value.cols() })
            .collect(),
    };
    let json = serde_json::to_vec(&header).map_err(|e| Error::Checkpoint(e.to_string()))?;
    let mut out = Vec::with_capacity(20 + json.len() + 4 * params.num_elements());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(json.len() as u64).to_le_bytes());
    out.extend_from_slice(&json);
    for (_, p) in params.iter() {
        for v in p.value.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

fn take<'a>(bytes: &mut &'a [u8], n: usize, what: &str) -> Result<&'a [u8]> {
    if bytes.len() < n {
        return Err(Error::Checkpoint(format!("truncated while reading {what}")));
    }
    let (head, rest) = bytes.split_at(n);
    *bytes = rest;
    Ok(head)
}

pub fn from_bytes(mut bytes: &[u8]) -> Result<Checkpoint> {
    let magic = take(&mut bytes, MAGIC.len(), "magic")?;
    if magic != MAGIC {
        return Err(Error::Checkpoint("not a checkpoint file (bad magic)".into()));
    }
    let version = u32::from_le_bytes(take(&mut bytes, 4, "version")?.try_into().expect("4 bytes"));
    if version != FORMAT_VERSION {
        return Err(Error::CheckpointVersion { found: version, expected: FORMAT_VERSION });
    }
    let len = u64::from_le_bytes(take(&mut bytes, 8, "header length")?.try_into().expect("8 bytes"));
    let len = usize::try_from(len).map_err(|_| Error::Checkpoint("header length overflows".into()))?;
    let header: Header =
        serde_json::from_slice(take(&mut bytes, len, "header")?).map_err(|e| Error::Checkpoint(e.to_string()))?;
    if header.format_version != version {
        return Err(Error::Checkpoint("header and preamble versions disagree".into()));
    }
    header.config.validate().map_err(|e| Error::Checkpoint(e.to_string()))?;

    let model_config = ModelConfig::new(&header.config, &header.vocab);
    let (model, mut params) = CoGuidingNet::init::<f32>(model_config, header.config.seed)?;
    if header.params.len() != params.len() {
        return Err(Error::Checkpoint(format!(
            "{} stored parameters, model has {}",
            header.params.len(),
            params.len()
        )));
    }
    for entry in &header.params {
        let id = params
            .id(&entry.name)
            .map_err(|_| Error::Checkpoint(format!("unknown parameter `{}`", entry.name)))?;
        let param = params.get_mut(id);
        if param.value.shape() != (entry.rows, entry.cols) {
            return Err(Error::Checkpoint(format!(
                "`{}` stored as {}x{}, model expects {:?}",
                entry.name, entry.rows, entry.cols, param.value.shape()
            )));
        }
        let raw = take(&mut bytes, 4 * entry.rows * entry.cols, &entry.name)?;
        let data = raw.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes"))).collect();
        param.value = Tensor::new(entry.rows, entry.cols, data)?;
    }
    if !bytes.is_empty() {
        return Err(Error::Checkpoint(format!("{} trailing bytes", bytes.len())));
    }
    Ok(Checkpoint { config: header.config, vocab: header.vocab, model, params, best_epoch: header.best_epoch })
}

pub fn save(path: &Path, config: &TrainConfig, vocab: &Vocabulary, params: &ParamStore<f32>, best_epoch: usize) -> Result<()> {
    let bytes = to_bytes(config, vocab, params, best_epoch)?;
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn save_trained(path: &Path, t: &Trained) -> Result<()> {
    save(path, &t.config, &t.vocab, &t.params, t.best_epoch)
}

pub fn load(path: &Path) -> Result<Checkpoint> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    from_bytes(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::build_vocab;
    use crate::synth::{generate_synthetic, SynthSpec};

    fn tiny() -> (TrainConfig, Vocabulary, ParamStore<f32>) {
        let corpus = generate_synthetic(&SynthSpec::default()).unwrap();
        let mut cfg = TrainConfig::desk();
        cfg.word_dim = 8;
        cfg.lstm_dim = 8;
        cfg.attn_dim = 8;
        cfg.hidden_dim = 8;
        cfg.heads = 2;
        let vocab = build_vocab(&corpus.train, cfg.min_freq).unwrap();
        let (_, params) = CoGuidingNet::init::<f32>(ModelConfig::new(&cfg, &vocab), 3).unwrap();
        (cfg, vocab, params)
    }

    #[test]
    fn bytes_round_trip() {
        let (cfg, vocab, params) = tiny();
        let bytes = to_bytes(&cfg, &vocab, &params, 5).unwrap();
        let ck = from_bytes(&bytes).unwrap();
        assert_eq!(ck.params, params);
        assert_eq!(ck.vocab, vocab);
        assert_eq!(ck.best_epoch, 5);
    }

    #[test]
    fn wrong_version_is_named() {
        let (cfg, vocab, params) = tiny();
        let mut bytes = to_bytes(&cfg, &vocab, &params, 1).unwrap();
        bytes[8..12].copy_from_slice(&7u32.to_le_bytes());
        assert!(matches!(from_bytes(&bytes), Err(Error::CheckpointVersion { found: 7, .. })));
    }

    #[test]
    fn truncation_and_garbage_are_rejected() {
        let (cfg, vocab, params) = tiny();
        let bytes = to_bytes(&cfg, &vocab, &params, 1).unwrap();
        assert!(matches!(from_bytes(&bytes[..bytes.len() - 3]), Err(Error::Checkpoint(_))));
        assert!(matches!(from_bytes(b"hello world, not a model"), Err(Error::Checkpoint(_))));
        let mut extra = bytes.clone();
        extra.push(0);
        assert!(matches!(from_bytes(&extra), Err(Error::Checkpoint(_))));
    }
}
