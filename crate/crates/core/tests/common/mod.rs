//! Independent reference implementations shared by the integration tests.
#![allow(dead_code)]

use std::collections::BTreeSet;

use coguide::graph::{Edge, HeteroGraph, NodeType, Relation};
use coguide::hgat::HgatLayer;
use coguide_autodiff::{ParamId, ParamStore, Tensor};
use rand::Rng;

pub type EdgeSet = BTreeSet<(usize, usize, &'static str)>;

fn near(a: usize, b: usize, w: usize) -> bool {
    a.abs_diff(b) <= w
}

/// Enumerates every ordered node pair of the slot-to-intent graph and keeps
/// those the construction rules allow.
pub fn s2i_oracle(n: usize, w: usize) -> EdgeSet {
    let mut out = BTreeSet::new();
    let tok = |v: usize| v % n;
    let is_intent = |v: usize| v < n;
    for src in 0..2 * n {
        for dst in 0..2 * n {
            if !near(tok(src), tok(dst), w) {
                continue;
            }
            let rel = match (is_intent(src), is_intent(dst)) {
                (true, true) => Relation::IntentSemanticsDependencies,
                (false, true) => Relation::SlotToIntentGuidance,
                (false, false) => Relation::SlotLabelDependencies,
                (true, false) => Relation::IntentToSlotLabel,
            };
            out.insert((src, dst, rel.name()));
        }
    }
    out
}

pub fn i2s_oracle(n: usize, w: usize, m: usize) -> EdgeSet {
    let mut out = BTreeSet::new();
    for src in 0..n + m {
        for dst in 0..n + m {
            let rel = match (src < n, dst < n) {
                (true, true) if near(src, dst, w) => Relation::SlotSemanticsDependencies,
                (true, true) => continue,
                (false, true) => Relation::IntentToSlotGuidance,
                (true, false) => Relation::SemanticsToIntentLabel,
                (false, false) => Relation::IntentLabelDependencies,
            };
            out.insert((src, dst, rel.name()));
        }
    }
    out
}

/// Random heterogeneous graph with two node types and one relation per
/// ordered type pair. Every node keeps a self-edge so none is isolated.
pub fn random_hetero_graph<R: Rng>(n: usize, density: f64, rng: &mut R) -> HeteroGraph {
    let types = [NodeType::IntentSemantics, NodeType::SlotLabel];
    let relations = vec![
        Relation::IntentSemanticsDependencies,
        Relation::SlotToIntentGuidance,
        Relation::SlotLabelDependencies,
        Relation::IntentToSlotLabel,
    ];
    let rel_of = |s: usize, d: usize| match (s, d) {
        (0, 0) => 0,
        (1, 0) => 1,
        (1, 1) => 2,
        _ => 3,
    };
    let kinds: Vec<usize> = (0..n).map(|_| rng.random_range(0..2)).collect();
    let mut edges = Vec::new();
    for dst in 0..n {
        for src in 0..n {
            if src == dst || rng.random_bool(density) {
                edges.push(Edge { src, dst, relation: rel_of(kinds[src], kinds[dst]) });
            }
        }
    }
    HeteroGraph::new(kinds.iter().map(|&k| types[k]).collect(), types.to_vec(), relations, edges).unwrap()
}

/// Applies a node permutation: old node `i` becomes `perm[i]`.
pub fn permute_graph(g: &HeteroGraph, perm: &[usize]) -> HeteroGraph {
    let n = g.num_nodes();
    let mut types = vec![g.node_type(0); n];
    for i in 0..n {
        types[perm[i]] = g.node_type(i);
    }
    let edges = g
        .edges()
        .iter()
        .map(|e| Edge { src: perm[e.src], dst: perm[e.dst], relation: e.relation })
        .collect();
    HeteroGraph::new(types, g.node_types().to_vec(), g.relations().to_vec(), edges).unwrap()
}

pub fn random_tensor<R: Rng>(rows: usize, cols: usize, rng: &mut R) -> Tensor<f64> {
    Tensor::new(rows, cols, (0..rows * cols).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
}

fn row_times(x: &Tensor<f64>, i: usize, w: &Tensor<f64>) -> Vec<f64> {
    (0..w.cols())
        .map(|c| (0..w.rows()).map(|k| x.get(i, k) * w.get(k, c)).sum())
        .collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn leaky(v: f64, slope: f64) -> f64 {
    if v >= 0.0 {
        v
    } else {
        slope * v
    }
}

/// Explicit-loop recomputation of one relation-aware layer: per node, per
/// head, softmax within each relation's neighbor list, sum across
/// relations, leaky rectifier, concatenate heads.
pub fn dense_hgat(layer: &HgatLayer, store: &ParamStore<f64>, x: &Tensor<f64>, g: &HeteroGraph) -> Tensor<f64> {
    let n = g.num_nodes();
    let scale = 1.0 / (layer.dim as f64).sqrt();
    let p = |id: ParamId| store.get(id).value.clone();
    let mut out = Vec::with_capacity(n * layer.dim);
    for i in 0..n {
        for k in 0..layer.num_heads() {
            let mut acc: Option<Vec<f64>> = None;
            for r in 0..g.relations().len() {
                let srcs = g.incoming(r, i);
                if srcs.is_empty() {
                    continue;
                }
                let h = &layer.heads[r][k];
                let (wq, wk, wv) = (p(h.query), p(h.key), p(h.value));
                let q = row_times(x, i, &wq);
                let scores: Vec<f64> = srcs.iter().map(|&j| dot(&q, &row_times(x, j, &wk)) * scale).collect();
                let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let exps: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
                let z: f64 = exps.iter().sum();
                let acc = acc.get_or_insert_with(|| vec![0.0; wv.cols()]);
                for (&j, e) in srcs.iter().zip(&exps) {
                    for (a, v) in acc.iter_mut().zip(row_times(x, j, &wv)) {
                        *a += e / z * v;
                    }
                }
            }
            let acc = acc.expect("every node has an incoming edge");
            out.extend(acc.into_iter().map(|v| leaky(v, layer.slope)));
        }
    }
    // `out` is node-major, head-major within a node, which is the row-major
    // layout of the concatenated heads.
    Tensor::new(n, layer.dim, out).unwrap()
}

/// Standard multi-head attention over each node's full incoming
/// neighborhood, ignoring edge types, using relation 0's weights.
pub fn dense_homogeneous_mha(
    layer: &HgatLayer,
    store: &ParamStore<f64>,
    x: &Tensor<f64>,
    neighbors: &[Vec<usize>],
) -> Tensor<f64> {
    let n = neighbors.len();
    let scale = 1.0 / (layer.dim as f64).sqrt();
    let mut out = Vec::new();
    for (i, srcs) in neighbors.iter().enumerate() {
        for k in 0..layer.num_heads() {
            let h = &layer.heads[0][k];
            let (wq, wk, wv) = (&store.get(h.query).value, &store.get(h.key).value, &store.get(h.value).value);
            let q = row_times(x, i, wq);
            let exps: Vec<f64> = srcs.iter().map(|&j| (dot(&q, &row_times(x, j, wk)) * scale).exp()).collect();
            let z: f64 = exps.iter().sum();
            let mut acc = vec![0.0; wv.cols()];
            for (&j, e) in srcs.iter().zip(&exps) {
                for (a, v) in acc.iter_mut().zip(row_times(x, j, wv)) {
                    *a += e / z * v;
                }
            }
            out.extend(acc.into_iter().map(|v| leaky(v, layer.slope)));
        }
    }
    Tensor::new(n, layer.dim, out).unwrap()
}

pub fn max_abs_diff(a: &Tensor<f64>, b: &Tensor<f64>) -> f64 {
    assert_eq!(a.shape(), b.shape());
    a.data().iter().zip(b.data()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Random tag sequence over `labels`, deliberately including stray `I-`
/// tags and label switches.
pub fn random_tags<R: Rng>(len: usize, labels: &[&str], rng: &mut R) -> Vec<String> {
    (0..len)
        .map(|_| match rng.random_range(0..3) {
            0 => "O".to_string(),
            1 => format!("B-{}", labels[rng.random_range(0..labels.len())]),
            _ => format!("I-{}", labels[rng.random_range(0..labels.len())]),
        })
        .collect()
}

fn parts(tag: &str) -> (&str, &str) {
    match tag.split_once('-') {
        Some((p @ ("B" | "I"), l)) if !l.is_empty() => (p, l),
        _ => ("O", ""),
    }
}

/// Enumerates every `(start, end)` interval and keeps the maximal ones
/// that open with a tag not continuing its left neighbor and whose
/// remaining tags all continue the same label.
pub fn brute_spans(tags: &[String]) -> BTreeSet<(usize, usize, String)> {
    let n = tags.len();
    let mut spans = BTreeSet::new();
    for start in 0..n {
        let (p, label) = parts(&tags[start]);
        if p == "O" {
            continue;
        }
        let continues_left = p == "I" && start > 0 && {
            let (lp, ll) = parts(&tags[start - 1]);
            lp != "O" && ll == label
        };
        if continues_left {
            continue;
        }
        for end in start + 1..=n {
            let inner_ok = (start + 1..end).all(|k| parts(&tags[k]) == ("I", label));
            let closed = end == n || parts(&tags[end]) != ("I", label);
            if inner_ok && closed {
                spans.insert((start, end, label.to_string()));
            }
        }
    }
    spans
}

/// Span precision, recall and F1 from the brute-force extractor.
pub fn brute_span_f1(pred: &[Vec<String>], gold: &[Vec<String>]) -> (f64, f64, f64) {
    let (mut g, mut p, mut c) = (0usize, 0usize, 0usize);
    for (ps, gs) in pred.iter().zip(gold) {
        let a = brute_spans(ps);
        let b = brute_spans(gs);
        p += a.len();
        g += b.len();
        c += a.intersection(&b).count();
    }
    if g == 0 && p == 0 {
        return (1.0, 1.0, 1.0);
    }
    let pr = if p == 0 { 0.0 } else { c as f64 / p as f64 };
    let rc = if g == 0 { 0.0 } else { c as f64 / g as f64 };
    let f = if pr + rc == 0.0 { 0.0 } else { 2.0 * pr * rc / (pr + rc) };
    (pr, rc, f)
}
