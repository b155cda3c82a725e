//! Relation-specific multi-head graph attention.
//!
//! For node `i` and head `k`, each incoming edge `j -> i` of relation `r`
//! gets the score `(Wq[r,k] h_i) . (Wk[r,k] h_j) / sqrt(d)`. Scores are
//! normalized with a softmax over the `r`-typed neighbors of `i` only, and
//! the weighted messages `Wv[r,k] h_j` are summed over all incoming edges of
//! every relation. Each head's sum goes through a leaky rectifier and the
//! heads are concatenated back to width `d`.

use coguide_autodiff::{Init, ParamId, ParamStore, Real, Session, Var};
use rand::Rng;

use crate::graph::HeteroGraph;
use crate::{Error, Result};

#[derive(Debug, Clone)]
pub struct HeadParams {
    pub value: ParamId,
    pub query: ParamId,
    pub key: ParamId,
}

#[derive(Debug, Clone)]
pub struct HgatLayer {
    /// `heads[r][k]`.
    pub heads: Vec<Vec<HeadParams>>,
    pub dim: usize,
    pub slope: f64,
}

/// Attention weights of one relation and head; entry `(i, j)` is the
/// weight of edge `j -> i`.
#[derive(Debug, Clone, Copy)]
pub struct AttentionMap {
    pub relation: usize,
    pub head: usize,
    pub weights: Var,
}

impl HgatLayer {
    pub fn register<F: Real, R: Rng + ?Sized>(
        store: &mut ParamStore<F>,
        name: &str,
        relations: usize,
        heads: usize,
        dim: usize,
        slope: f64,
        rng: &mut R,
    ) -> Self {
        assert!(heads > 0 && dim.is_multiple_of(heads), "dim must split evenly across heads");
        let head_dim = dim / heads;
        let heads = (0..relations)
            .map(|r| {
                (0..heads)
                    .map(|k| {
                        let mut w = |role: &str| {
                            store.register(format!("{name}.rel{r}.head{k}.{role}"), dim, head_dim, Init::FanIn, rng)
                        };
                        HeadParams { value: w("value"), query: w("query"), key: w("key") }
                    })
                    .collect()
            })
            .collect();
        Self { heads, dim, slope }
    }

    pub fn num_relations(&self) -> usize {
        self.heads.len()
    }

    pub fn num_heads(&self) -> usize {
        self.heads.first().map_or(0, Vec::len)
    }

    pub fn forward<F: Real>(&self, s: &mut Session<'_, F>, x: Var, g: &GraphMasks) -> Result<Var> {
        Ok(self.forward_with_attention(s, x, g)?.0)
    }

    pub fn forward_with_attention<F: Real>(
        &self,
        s: &mut Session<'_, F>,
        x: Var,
        g: &GraphMasks,
    ) -> Result<(Var, Vec<AttentionMap>)> {
        let (n, d) = s.tape.shape(x);
        if n != g.num_nodes {
            return Err(Error::Contract(format!("{n} node states for a {}-node graph", g.num_nodes)));
        }
        if d != self.dim {
            return Err(Error::Contract(format!("node states have width {d}, layer expects {}", self.dim)));
        }
        if g.masks.len() > self.num_relations() {
            return Err(Error::Contract(format!(
                "graph has {} relations, layer has parameters for {}",
                g.masks.len(),
                self.num_relations()
            )));
        }
        let scale = F::of(1.0 / (self.dim as f64).sqrt());
        let mut maps = Vec::new();
        let mut head_outputs = Vec::with_capacity(self.num_heads());
        for k in 0..self.num_heads() {
            let mut total: Option<Var> = None;
            for (r, mask) in g.masks.iter().enumerate() {
                let Some(mask) = mask else { continue };
                let p = &self.heads[r][k];
                let (wq, wk, wv) = (s.param(p.query), s.param(p.key), s.param(p.value));
                let q = s.tape.matmul(x, wq)?;
                let key = s.tape.matmul(x, wk)?;
                let v = s.tape.matmul(x, wv)?;
                let scores = s.tape.matmul_nt(q, key)?;
                let scores = s.tape.scale(scores, scale)?;
                let alpha = s.tape.masked_softmax(scores, mask)?;
                maps.push(AttentionMap { relation: r, head: k, weights: alpha });
                let message = s.tape.matmul(alpha, v)?;
                total = Some(match total {
                    Some(t) => s.tape.add(t, message)?,
                    None => message,
                });
            }
            let total = total.ok_or_else(|| Error::Contract("graph has no edges".into()))?;
            head_outputs.push(s.tape.leaky_relu(total, F::of(self.slope))?);
        }
        Ok((s.tape.concat_cols(&head_outputs)?, maps))
    }
}

/// Per-relation adjacency masks of a graph, validated for attention.
#[derive(Debug, Clone)]
pub struct GraphMasks {
    pub num_nodes: usize,
    /// `None` for relations without edges.
    pub masks: Vec<Option<Vec<bool>>>,
}

impl GraphMasks {
    /// Fails if some node has no incoming edge at all.
    pub fn new(g: &HeteroGraph) -> Result<Self> {
        if let Some(&node) = g.isolated_nodes().first() {
            return Err(Error::Contract(format!("node {node} has no incoming edges")));
        }
        let masks = (0..g.relations().len())
            .map(|r| {
                let m = g.adjacency_mask(r);
                m.iter().any(|&b| b).then_some(m)
            })
            .collect();
        Ok(Self { num_nodes: g.num_nodes(), masks })
    }
}

/// `L` stacked layers with separate parameters.
#[derive(Debug, Clone)]
pub struct Hgat {
    pub layers: Vec<HgatLayer>,
}

impl Hgat {
    #[allow(clippy::too_many_arguments)]
    pub fn register<F: Real, R: Rng + ?Sized>(
        store: &mut ParamStore<F>,
        name: &str,
        layers: usize,
        relations: usize,
        heads: usize,
        dim: usize,
        slope: f64,
        rng: &mut R,
    ) -> Self {
        Self {
            layers: (0..layers)
                .map(|l| HgatLayer::register(store, &format!("{name}.layer{l}"), relations, heads, dim, slope, rng))
                .collect(),
        }
    }

    pub fn forward<F: Real>(&self, s: &mut Session<'_, F>, x: Var, g: &HeteroGraph) -> Result<Var> {
        if self.layers.is_empty() {
            return Err(Error::Contract("HGAT needs at least one layer".into()));
        }
        let masks = GraphMasks::new(g)?;
        let mut h = x;
        for layer in &self.layers {
            h = layer.forward(s, h, &masks)?;
        }
        Ok(h)
    }
}
