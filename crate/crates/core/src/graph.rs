//! Heterogeneous semantics-label graphs.
//!
//! The slot-to-intent graph has `2n` nodes: intent-semantics nodes
//! `0..n` and slot-label nodes `n..2n`, all connected inside a local
//! window. The intent-to-slot graph has `n + m` nodes: slot-semantics
//! nodes `0..n` (windowed among themselves) and intent-label nodes
//! `n..n+m`, which are connected to every node. Windows include the node
//! itself, so every semantics node has an incoming edge in each of its
//! windowed relations.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum NodeType {
    IntentSemantics,
    SlotLabel,
    SlotSemantics,
    IntentLabel,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Relation {
    /// intent semantics -> intent semantics
    IntentSemanticsDependencies,
    /// slot label -> intent semantics
    SlotToIntentGuidance,
    /// slot label -> slot label
    SlotLabelDependencies,
    /// intent semantics -> slot label
    IntentToSlotLabel,
    /// slot semantics -> slot semantics
    SlotSemanticsDependencies,
    /// intent label -> slot semantics
    IntentToSlotGuidance,
    /// slot semantics -> intent label
    SemanticsToIntentLabel,
    /// intent label -> intent label
    IntentLabelDependencies,
    /// Single relation used when relation types are ablated.
    Homogeneous,
}

impl Relation {
    pub fn name(self) -> &'static str {
        match self {
            Self::IntentSemanticsDependencies => "intent_semantics_dependencies",
            Self::SlotToIntentGuidance => "slot_to_intent_guidance",
            Self::SlotLabelDependencies => "slot_label_dependencies",
            Self::IntentToSlotLabel => "intent_to_slot_label",
            Self::SlotSemanticsDependencies => "slot_semantics_dependencies",
            Self::IntentToSlotGuidance => "intent_to_slot_guidance",
            Self::SemanticsToIntentLabel => "semantics_to_intent_label",
            Self::IntentLabelDependencies => "intent_label_dependencies",
            Self::Homogeneous => "homogeneous",
        }
    }
}

/// Directed edge `src -> dst`; `relation` indexes [`HeteroGraph::relations`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Edge {
    pub src: usize,
    pub dst: usize,
    pub relation: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HeteroGraph {
    kinds: Vec<NodeType>,
    type_set: Vec<NodeType>,
    relations: Vec<Relation>,
    edges: Vec<Edge>,
    /// `incoming[r][i]`: sources of `r`-typed edges into node `i`.
    incoming: Vec<Vec<Vec<usize>>>,
}

impl HeteroGraph {
    pub fn new(
        node_types: Vec<NodeType>,
        type_set: Vec<NodeType>,
        relations: Vec<Relation>,
        edges: Vec<Edge>,
    ) -> Result<Self> {
        let n = node_types.len();
        let mut seen = BTreeSet::new();
        let mut incoming = vec![vec![Vec::new(); n]; relations.len()];
        for e in &edges {
            if e.src >= n || e.dst >= n {
                return Err(Error::Graph(format!("edge {e:?} outside {n} nodes")));
            }
            if e.relation >= relations.len() {
                return Err(Error::Graph(format!("edge {e:?} has unknown relation")));
            }
            if !seen.insert(*e) {
                return Err(Error::Graph(format!("duplicate edge {e:?}")));
            }
            incoming[e.relation][e.dst].push(e.src);
        }
        if let Some(t) = node_types.iter().find(|t| !type_set.contains(t)) {
            return Err(Error::Graph(format!("node type {t:?} missing from type set")));
        }
        Ok(Self { kinds: node_types, type_set, relations, edges, incoming })
    }

    pub fn num_nodes(&self) -> usize {
        self.kinds.len()
    }

    pub fn node_type(&self, node: usize) -> NodeType {
        self.kinds[node]
    }

    pub fn node_types(&self) -> &[NodeType] {
        &self.type_set
    }

    pub fn relations(&self) -> &[Relation] {
        &self.relations
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn relation_of(&self, e: &Edge) -> Relation {
        self.relations[e.relation]
    }

    pub fn incoming(&self, relation: usize, node: usize) -> &[usize] {
        &self.incoming[relation][node]
    }

    /// Row-major `N x N` mask: entry `(i, j)` is set when `j -> i` has type
    /// `relation`.
    pub fn adjacency_mask(&self, relation: usize) -> Vec<bool> {
        let n = self.num_nodes();
        let mut mask = vec![false; n * n];
        for (i, srcs) in self.incoming[relation].iter().enumerate() {
            for &j in srcs {
                mask[i * n + j] = true;
            }
        }
        mask
    }

    /// Nodes with no incoming edge of any type.
    pub fn isolated_nodes(&self) -> Vec<usize> {
        (0..self.num_nodes())
            .filter(|&i| self.incoming.iter().all(|per_rel| per_rel[i].is_empty()))
            .collect()
    }

    /// `(src, dst, relation name)` triples.
    pub fn edge_set(&self) -> BTreeSet<(usize, usize, &'static str)> {
        self.edges
            .iter()
            .map(|e| (e.src, e.dst, self.relations[e.relation].name()))
            .collect()
    }

    /// One `src dst relation` line per edge.
    pub fn export_text(&self) -> String {
        let mut out = String::new();
        for e in &self.edges {
            let _ = writeln!(out, "{} {} {}", e.src, e.dst, self.relations[e.relation].name());
        }
        out
    }
}

fn window(i: usize, w: usize, n: usize) -> std::ops::RangeInclusive<usize> {
    i.saturating_sub(w)..=(i + w).min(n - 1)
}

/// Slot-to-intent graph over `n` tokens with local window `w`.
pub fn build_s2i_graph(n: usize, w: usize) -> Result<HeteroGraph> {
    if n == 0 {
        return Err(Error::Graph("graph needs at least one token".into()));
    }
    use Relation::*;
    let relations = vec![
        IntentSemanticsDependencies,
        SlotToIntentGuidance,
        SlotLabelDependencies,
        IntentToSlotLabel,
    ];
    let intent = |i: usize| i;
    let slot = |i: usize| n + i;
    let mut edges = Vec::new();
    for i in 0..n {
        for j in window(i, w, n) {
            edges.push(Edge { src: intent(j), dst: intent(i), relation: 0 });
            edges.push(Edge { src: slot(j), dst: intent(i), relation: 1 });
            edges.push(Edge { src: slot(j), dst: slot(i), relation: 2 });
            edges.push(Edge { src: intent(j), dst: slot(i), relation: 3 });
        }
    }
    let mut node_types = vec![NodeType::IntentSemantics; n];
    node_types.extend(std::iter::repeat_n(NodeType::SlotLabel, n));
    HeteroGraph::new(
        node_types,
        vec![NodeType::IntentSemantics, NodeType::SlotLabel],
        relations,
        edges,
    )
}

/// Intent-to-slot graph over `n` tokens and `m` estimated intents.
pub fn build_i2s_graph(n: usize, w: usize, m: usize) -> Result<HeteroGraph> {
    if n == 0 {
        return Err(Error::Graph("graph needs at least one token".into()));
    }
    use Relation::*;
    let relations = vec![
        SlotSemanticsDependencies,
        IntentToSlotGuidance,
        SemanticsToIntentLabel,
        IntentLabelDependencies,
    ];
    let label = |j: usize| n + j;
    let mut edges = Vec::new();
    for i in 0..n {
        for j in window(i, w, n) {
            edges.push(Edge { src: j, dst: i, relation: 0 });
        }
        for j in 0..m {
            edges.push(Edge { src: label(j), dst: i, relation: 1 });
        }
    }
    for j in 0..m {
        for i in 0..n {
            edges.push(Edge { src: i, dst: label(j), relation: 2 });
        }
        for k in 0..m {
            edges.push(Edge { src: label(k), dst: label(j), relation: 3 });
        }
    }
    let mut node_types = vec![NodeType::SlotSemantics; n];
    node_types.extend(std::iter::repeat_n(NodeType::IntentLabel, m));
    HeteroGraph::new(
        node_types,
        vec![NodeType::SlotSemantics, NodeType::IntentLabel],
        relations,
        edges,
    )
}

/// Same topology with every edge mapped to one relation type.
pub fn collapse_to_homogeneous(g: &HeteroGraph) -> HeteroGraph {
    let edges = g.edges.iter().map(|e| Edge { relation: 0, ..*e }).collect();
    HeteroGraph::new(
        g.kinds.clone(),
        g.type_set.clone(),
        vec![Relation::Homogeneous],
        edges,
    )
    .expect("distinct typed edges stay distinct: each relation joins a distinct pair of node types")
}
