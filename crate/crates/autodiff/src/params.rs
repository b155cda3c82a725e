use std::collections::HashMap;

use rand::Rng;
use rand_distr::{Distribution, Normal, Uniform};

use crate::{AutodiffError, Real, Result, Tape, Tensor, Var};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId(usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Initialization scheme for a new parameter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Init {
    /// Uniform in `(-1/sqrt(fan_in), 1/sqrt(fan_in))` with `fan_in` = rows.
    FanIn,
    /// Normal with mean 0 and the given standard deviation.
    Normal(f64),
    Zeros,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Param<F> {
    pub name: String,
    pub value: Tensor<F>,
    pub grad: Option<Vec<F>>,
}

/// Named registry of trainable arrays.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamStore<F> {
    params: Vec<Param<F>>,
    by_name: HashMap<String, ParamId>,
}

impl<F: Real> ParamStore<F> {
    pub fn new() -> Self {
        Self { params: Vec::new(), by_name: HashMap::new() }
    }

    /// Registers a parameter initialized from `rng`. Names must be unique.
    pub fn register<R: Rng + ?Sized>(
        &mut self,
        name: impl Into<String>,
        rows: usize,
        cols: usize,
        init: Init,
        rng: &mut R,
    ) -> ParamId {
        let data: Vec<F> = match init {
            Init::Zeros => vec![F::zero(); rows * cols],
            Init::FanIn => {
                let bound = 1.0 / (rows.max(1) as f64).sqrt();
                let dist = Uniform::new(-bound, bound).expect("positive bound");
                (0..rows * cols).map(|_| F::of(dist.sample(rng))).collect()
            }
            Init::Normal(std) => {
                let dist = Normal::new(0.0, std).expect("valid std");
                (0..rows * cols).map(|_| F::of(dist.sample(rng))).collect()
            }
        };
        let value = Tensor::new(rows, cols, data).expect("consistent shape");
        self.insert(name.into(), value)
    }

    /// Inserts a parameter with an explicit value.
    pub fn insert(&mut self, name: String, value: Tensor<F>) -> ParamId {
        assert!(!self.by_name.contains_key(&name), "duplicate parameter `{name}`");
        let id = ParamId(self.params.len());
        self.by_name.insert(name.clone(), id);
        self.params.push(Param { name, value, grad: None });
        id
    }

    pub fn id(&self, name: &str) -> Result<ParamId> {
        self.by_name
            .get(name)
            .copied()
            .ok_or_else(|| AutodiffError::UnknownParam(name.to_string()))
    }

    pub fn get(&self, id: ParamId) -> &Param<F> {
        &self.params[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Param<F> {
        &mut self.params[id.0]
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &Param<F>)> {
        self.params.iter().enumerate().map(|(i, p)| (ParamId(i), p))
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut Param<F>> {
        self.params.iter_mut()
    }

    pub fn num_elements(&self) -> usize {
        self.params.iter().map(|p| p.value.len()).sum()
    }

    /// Sets every gradient to zeros of the right size.
    pub fn zero_grads(&mut self) {
        for p in &mut self.params {
            p.grad = Some(vec![F::zero(); p.value.len()]);
        }
    }

    pub fn clear_grads(&mut self) {
        for p in &mut self.params {
            p.grad = None;
        }
    }

    /// Converts every value to another precision, dropping gradients.
    pub fn cast<G: Real>(&self) -> ParamStore<G> {
        ParamStore {
            params: self
                .params
                .iter()
                .map(|p| Param { name: p.name.clone(), value: p.value.cast(), grad: None })
                .collect(),
            by_name: self.by_name.clone(),
        }
    }
}

/// A forward pass in progress: a fresh tape plus lazily bound parameters.
pub struct Session<'p, F> {
    pub tape: Tape<F>,
    params: &'p ParamStore<F>,
    bound: Vec<Option<Var>>,
}

impl<'p, F: Real> Session<'p, F> {
    pub fn new(params: &'p ParamStore<F>) -> Self {
        Self { tape: Tape::new(), params, bound: vec![None; params.len()] }
    }

    pub fn params(&self) -> &'p ParamStore<F> {
        self.params
    }

    /// The tape variable holding parameter `id`, created on first use.
    pub fn param(&mut self, id: ParamId) -> Var {
        if let Some(v) = self.bound[id.0] {
            return v;
        }
        let v = self.tape.leaf(self.params.get(id).value.clone());
        self.bound[id.0] = Some(v);
        v
    }

    pub fn finish(self) -> (Tape<F>, Bindings) {
        (self.tape, Bindings { bound: self.bound })
    }
}

/// Which tape variable holds which parameter.
#[derive(Debug, Clone)]
pub struct Bindings {
    bound: Vec<Option<Var>>,
}

impl Bindings {
    /// Parameters that were touched by the forward pass.
    pub fn used(&self) -> impl Iterator<Item = ParamId> + '_ {
        self.bound
            .iter()
            .enumerate()
            .filter_map(|(i, b)| b.map(|_| ParamId(i)))
    }

    /// Adds tape gradients into the store, scaled by `weight`. Parameters
    /// without a gradient buffer get one.
    pub fn accumulate_into<F: Real>(&self, tape: &Tape<F>, store: &mut ParamStore<F>, weight: F) {
        for (i, b) in self.bound.iter().enumerate() {
            let Some(var) = b else { continue };
            let Some(g) = tape.grad(*var) else { continue };
            let p = &mut store.params[i];
            let buf = p.grad.get_or_insert_with(|| vec![F::zero(); p.value.len()]);
            for (acc, &v) in buf.iter_mut().zip(g) {
                *acc = *acc + weight * v;
            }
        }
    }
}
