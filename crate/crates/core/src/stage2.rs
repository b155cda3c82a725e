//! Second-pass decoding in which each task is guided by the other task's
//! first-pass labels.
//!
//! Intent side: intent features and embedded estimated slot labels become
//! the nodes of the slot-to-intent graph. Slot side: a BiLSTM reads the
//! first-pass intent distribution next to the slot features, and its
//! output plus embedded estimated intents become the nodes of the
//! intent-to-slot graph. Label choices are discrete, so no gradient flows
//! through which label was picked, only through the label embeddings.

use coguide_autodiff::{Init, ParamId, ParamStore, Real, Session, Var};
use rand::Rng;

use crate::graph::{build_i2s_graph, build_s2i_graph, collapse_to_homogeneous, HeteroGraph};
use crate::hgat::Hgat;
use crate::layers::BiLstm;
use crate::stage1::{intent_voting, slot_argmax, IntentHead, SlotHead};
use crate::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct GuidanceSwitches {
    pub collapse_relations: bool,
    pub no_s2i_guidance: bool,
    pub no_i2s_guidance: bool,
}

#[derive(Debug, Clone)]
pub struct Stage2Output {
    pub intent_probs: Var,
    pub slot_probs: Var,
    pub final_intents: Vec<usize>,
    pub final_slots: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct GuidedDecoder {
    /// `N_S x d`.
    pub slot_label_embedding: ParamId,
    /// `N_I x d`.
    pub intent_label_embedding: ParamId,
    pub s2i: Hgat,
    pub intent_head: IntentHead,
    pub intent_aware_lstm: BiLstm,
    pub i2s: Hgat,
    pub slot_head: SlotHead,
    pub window: usize,
    pub vote_threshold: f64,
    pub switches: GuidanceSwitches,
}

pub struct GuidedDecoderDims {
    pub dim: usize,
    pub intents: usize,
    pub slots: usize,
    pub heads: usize,
    pub layers: usize,
    pub window: usize,
    pub slope: f64,
    pub vote_threshold: f64,
}

impl GuidedDecoder {
    pub fn register<F: Real, R: Rng + ?Sized>(
        store: &mut ParamStore<F>,
        dims: &GuidedDecoderDims,
        switches: GuidanceSwitches,
        rng: &mut R,
    ) -> Self {
        let d = dims.dim;
        let relations = if switches.collapse_relations { 1 } else { 4 };
        Self {
            slot_label_embedding: store.register("stage2.slot_label_embedding", dims.slots, d, Init::Normal(0.1), rng),
            intent_label_embedding: store.register("stage2.intent_label_embedding", dims.intents, d, Init::Normal(0.1), rng),
            s2i: Hgat::register(store, "stage2.s2i", dims.layers, relations, dims.heads, d, dims.slope, rng),
            intent_head: IntentHead::register(store, "stage2.intent_head", d, dims.intents, dims.slope, rng),
            intent_aware_lstm: BiLstm::register(store, "stage2.intent_aware_lstm", dims.intents + d, d, rng),
            i2s: Hgat::register(store, "stage2.i2s", dims.layers, relations, dims.heads, d, dims.slope, rng),
            slot_head: SlotHead::register(store, "stage2.slot_head", d, dims.slots, dims.slope, rng),
            window: dims.window,
            vote_threshold: dims.vote_threshold,
            switches,
        }
    }

    fn graph(&self, g: HeteroGraph) -> HeteroGraph {
        if self.switches.collapse_relations {
            collapse_to_homogeneous(&g)
        } else {
            g
        }
    }

    pub fn s2i_graph(&self, n: usize) -> Result<HeteroGraph> {
        Ok(self.graph(build_s2i_graph(n, self.window)?))
    }

    pub fn i2s_graph(&self, n: usize, m: usize) -> Result<HeteroGraph> {
        Ok(self.graph(build_i2s_graph(n, self.window, m)?))
    }

    /// Intent decoding guided by the estimated slot labels. Returns the
    /// `n x N_I` probabilities and the voted intents.
    pub fn s2i_decode<F: Real>(
        &self,
        s: &mut Session<'_, F>,
        intent_features: Var,
        estimated_slots: &[usize],
    ) -> Result<(Var, Vec<usize>)> {
        let n = s.tape.shape(intent_features).0;
        let guided = if self.switches.no_s2i_guidance {
            intent_features
        } else {
            let table = s.param(self.slot_label_embedding);
            let labels = s.tape.embedding(table, estimated_slots)?;
            let nodes = s.tape.concat_rows(&[intent_features, labels])?;
            let g = self.s2i_graph(n)?;
            let out = self.s2i.forward(s, nodes, &g)?;
            s.tape.slice_rows(out, 0, n)?
        };
        let probs = self.intent_head.forward(s, guided)?;
        let intents = intent_voting(s.tape.value(probs), self.vote_threshold);
        Ok((probs, intents))
    }

    /// BiLSTM over `intent_probs[i] || slot_features[i]`.
    pub fn intent_aware_bilstm<F: Real>(
        &self,
        s: &mut Session<'_, F>,
        intent_probs: Var,
        slot_features: Var,
    ) -> Result<Var> {
        let input = s.tape.concat_cols(&[intent_probs, slot_features])?;
        self.intent_aware_lstm.forward(s, input)
    }

    /// Slot decoding guided by the estimated intents. Returns the
    /// `n x N_S` distributions and the argmax tags.
    pub fn i2s_decode<F: Real>(
        &self,
        s: &mut Session<'_, F>,
        slot_states: Var,
        estimated_intents: &[usize],
    ) -> Result<(Var, Vec<usize>)> {
        let n = s.tape.shape(slot_states).0;
        let guided = if self.switches.no_i2s_guidance {
            slot_states
        } else {
            let nodes = if estimated_intents.is_empty() {
                slot_states
            } else {
                let table = s.param(self.intent_label_embedding);
                let labels = s.tape.embedding(table, estimated_intents)?;
                s.tape.concat_rows(&[slot_states, labels])?
            };
            let g = self.i2s_graph(n, estimated_intents.len())?;
            let out = self.i2s.forward(s, nodes, &g)?;
            s.tape.slice_rows(out, 0, n)?
        };
        let probs = self.slot_head.forward(s, guided)?;
        let slots = slot_argmax(s.tape.value(probs));
        Ok((probs, slots))
    }

    #[allow(clippy::too_many_arguments)]
    pub fn forward<F: Real>(
        &self,
        s: &mut Session<'_, F>,
        intent_features: Var,
        slot_features: Var,
        intent_probs: Var,
        estimated_intents: &[usize],
        estimated_slots: &[usize],
    ) -> Result<Stage2Output> {
        let (intent_probs1, final_intents) = self.s2i_decode(s, intent_features, estimated_slots)?;
        let slot_states = self.intent_aware_bilstm(s, intent_probs, slot_features)?;
        let (slot_probs1, final_slots) = self.i2s_decode(s, slot_states, estimated_intents)?;
        Ok(Stage2Output {
            intent_probs: intent_probs1,
            slot_probs: slot_probs1,
            final_intents,
            final_slots,
        })
    }
}
