use std::sync::atomic::{AtomicU64, Ordering};

use crate::tensor::{matmul, matmul_nt, matmul_tn};
use crate::{AutodiffError, Real, Result, Tensor};

static NEXT_TAPE_ID: AtomicU64 = AtomicU64::new(1);

/// Handle to a node recorded on a specific [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var {
    tape: u64,
    idx: usize,
}

impl Var {
    pub fn index(self) -> usize {
        self.idx
    }
}

#[derive(Debug, Clone)]
enum Op<F> {
    Leaf,
    Constant,
    MatMul(usize, usize),
    MatMulNt(usize, usize),
    Add(usize, usize),
    AddRow(usize, usize),
    Sub(usize, usize),
    Mul(usize, usize),
    Scale(usize, F),
    AddScalar(usize),
    ConcatCols(Vec<usize>),
    ConcatRows(Vec<usize>),
    SliceCols { src: usize, start: usize },
    GatherRows { src: usize, rows: Vec<usize> },
    Sigmoid(usize),
    Tanh(usize),
    LeakyRelu(usize, F),
    Relu(usize),
    Ln(usize),
    Clamp { src: usize, lo: F, hi: F },
    Softmax(usize),
    MaskedSoftmax(usize),
    Sum(usize),
    Mean(usize),
}

#[derive(Debug, Clone)]
struct Node<F> {
    value: Tensor<F>,
    op: Op<F>,
    needs_grad: bool,
}

/// Ordered record of a forward computation.
///
/// Nodes are appended in evaluation order, so every operation's inputs
/// precede it. `backward` may run once per tape.
#[derive(Debug)]
pub struct Tape<F> {
    id: u64,
    nodes: Vec<Node<F>>,
    grads: Vec<Option<Vec<F>>>,
    backward_done: bool,
}

impl<F: Real> Default for Tape<F> {
    fn default() -> Self {
        Self::new()
    }
}

impl<F: Real> Tape<F> {
    pub fn new() -> Self {
        Self {
            id: NEXT_TAPE_ID.fetch_add(1, Ordering::Relaxed),
            nodes: Vec::new(),
            grads: Vec::new(),
            backward_done: false,
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Records a differentiable input.
    pub fn leaf(&mut self, value: Tensor<F>) -> Var {
        self.push(value, Op::Leaf, true)
    }

    /// Records an input that never receives a gradient.
    pub fn constant(&mut self, value: Tensor<F>) -> Var {
        self.push(value, Op::Constant, false)
    }

    pub fn value(&self, v: Var) -> &Tensor<F> {
        debug_assert_eq!(v.tape, self.id);
        &self.nodes[v.idx].value
    }

    pub fn shape(&self, v: Var) -> (usize, usize) {
        self.value(v).shape()
    }

    /// Gradient of the loss with respect to `v`, once `backward` has run.
    /// `None` for nodes the loss does not depend on.
    pub fn grad(&self, v: Var) -> Option<&[F]> {
        if v.tape != self.id {
            return None;
        }
        self.grads.get(v.idx).and_then(|g| g.as_deref())
    }

    fn push(&mut self, value: Tensor<F>, op: Op<F>, needs_grad: bool) -> Var {
        self.nodes.push(Node { value, op, needs_grad });
        Var { tape: self.id, idx: self.nodes.len() - 1 }
    }

    fn check(&self, v: Var) -> Result<usize> {
        if v.tape != self.id || v.idx >= self.nodes.len() {
            return Err(AutodiffError::ForeignVar);
        }
        Ok(v.idx)
    }

    fn needs(&self, idx: &[usize]) -> bool {
        idx.iter().any(|&i| self.nodes[i].needs_grad)
    }

    fn unary(&mut self, a: Var, op: fn(usize) -> Op<F>, f: impl Fn(F) -> F) -> Result<Var> {
        let ai = self.check(a)?;
        let x = &self.nodes[ai].value;
        let data = x.data().iter().map(|&v| f(v)).collect();
        let out = Tensor::new(x.rows(), x.cols(), data)?;
        let needs = self.needs(&[ai]);
        Ok(self.push(out, op(ai), needs))
    }

    fn elementwise(
        &mut self,
        name: &'static str,
        a: Var,
        b: Var,
        op: fn(usize, usize) -> Op<F>,
        f: impl Fn(F, F) -> F,
    ) -> Result<Var> {
        let (ai, bi) = (self.check(a)?, self.check(b)?);
        let (x, y) = (&self.nodes[ai].value, &self.nodes[bi].value);
        if x.shape() != y.shape() {
            return Err(AutodiffError::Shape { op: name, lhs: x.shape(), rhs: y.shape() });
        }
        let data = x.data().iter().zip(y.data()).map(|(&p, &q)| f(p, q)).collect();
        let out = Tensor::new(x.rows(), x.cols(), data)?;
        let needs = self.needs(&[ai, bi]);
        Ok(self.push(out, op(ai, bi), needs))
    }

    /// `a (m x k) * b (k x n)`.
    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ai, bi) = (self.check(a)?, self.check(b)?);
        let (x, y) = (&self.nodes[ai].value, &self.nodes[bi].value);
        let ((m, k), (k2, n)) = (x.shape(), y.shape());
        if k != k2 {
            return Err(AutodiffError::Shape { op: "matmul", lhs: (m, k), rhs: (k2, n) });
        }
        let out = Tensor::new(m, n, matmul(x.data(), y.data(), m, k, n))?;
        let needs = self.needs(&[ai, bi]);
        Ok(self.push(out, Op::MatMul(ai, bi), needs))
    }

    /// `a (m x k) * b^T` with `b` of shape `n x k`.
    pub fn matmul_nt(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ai, bi) = (self.check(a)?, self.check(b)?);
        let (x, y) = (&self.nodes[ai].value, &self.nodes[bi].value);
        let ((m, k), (n, k2)) = (x.shape(), y.shape());
        if k != k2 {
            return Err(AutodiffError::Shape { op: "matmul_nt", lhs: (m, k), rhs: (n, k2) });
        }
        let out = Tensor::new(m, n, matmul_nt(x.data(), y.data(), m, k, n))?;
        let needs = self.needs(&[ai, bi]);
        Ok(self.push(out, Op::MatMulNt(ai, bi), needs))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.elementwise("add", a, b, Op::Add, |p, q| p + q)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.elementwise("sub", a, b, Op::Sub, |p, q| p - q)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.elementwise("mul", a, b, Op::Mul, |p, q| p * q)
    }

    /// Adds a `1 x n` row to every row of `a (m x n)`.
    pub fn add_row(&mut self, a: Var, row: Var) -> Result<Var> {
        let (ai, bi) = (self.check(a)?, self.check(row)?);
        let (x, b) = (&self.nodes[ai].value, &self.nodes[bi].value);
        if b.rows() != 1 || b.cols() != x.cols() {
            return Err(AutodiffError::Shape { op: "add_row", lhs: x.shape(), rhs: b.shape() });
        }
        let n = x.cols();
        let data = x
            .data()
            .iter()
            .enumerate()
            .map(|(i, &v)| v + b.data()[i % n])
            .collect();
        let out = Tensor::new(x.rows(), n, data)?;
        let needs = self.needs(&[ai, bi]);
        Ok(self.push(out, Op::AddRow(ai, bi), needs))
    }

    pub fn scale(&mut self, a: Var, s: F) -> Result<Var> {
        let ai = self.check(a)?;
        let x = &self.nodes[ai].value;
        let out = Tensor::new(x.rows(), x.cols(), x.data().iter().map(|&v| v * s).collect())?;
        let needs = self.needs(&[ai]);
        Ok(self.push(out, Op::Scale(ai, s), needs))
    }

    pub fn add_scalar(&mut self, a: Var, s: F) -> Result<Var> {
        self.unary(a, Op::AddScalar, move |v| v + s)
    }

    /// Concatenates along the column (last) axis.
    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        let idx = parts.iter().map(|&p| self.check(p)).collect::<Result<Vec<_>>>()?;
        let Some(&first) = idx.first() else {
            return Err(AutodiffError::Invalid { op: "concat_cols", msg: "no inputs".into() });
        };
        let rows = self.nodes[first].value.rows();
        for &i in &idx {
            let s = self.nodes[i].value.shape();
            if s.0 != rows {
                return Err(AutodiffError::Shape {
                    op: "concat_cols",
                    lhs: self.nodes[first].value.shape(),
                    rhs: s,
                });
            }
        }
        let cols: usize = idx.iter().map(|&i| self.nodes[i].value.cols()).sum();
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for &i in &idx {
                data.extend_from_slice(self.nodes[i].value.row_slice(r));
            }
        }
        let out = Tensor::new(rows, cols, data)?;
        let needs = self.needs(&idx);
        Ok(self.push(out, Op::ConcatCols(idx), needs))
    }

    /// Stacks inputs vertically.
    pub fn concat_rows(&mut self, parts: &[Var]) -> Result<Var> {
        let idx = parts.iter().map(|&p| self.check(p)).collect::<Result<Vec<_>>>()?;
        let Some(&first) = idx.first() else {
            return Err(AutodiffError::Invalid { op: "concat_rows", msg: "no inputs".into() });
        };
        let cols = self.nodes[first].value.cols();
        let mut data = Vec::new();
        let mut rows = 0;
        for &i in &idx {
            let v = &self.nodes[i].value;
            if v.cols() != cols {
                return Err(AutodiffError::Shape {
                    op: "concat_rows",
                    lhs: self.nodes[first].value.shape(),
                    rhs: v.shape(),
                });
            }
            rows += v.rows();
            data.extend_from_slice(v.data());
        }
        let out = Tensor::new(rows, cols, data)?;
        let needs = self.needs(&idx);
        Ok(self.push(out, Op::ConcatRows(idx), needs))
    }

    pub fn slice_cols(&mut self, a: Var, start: usize, len: usize) -> Result<Var> {
        let ai = self.check(a)?;
        let x = &self.nodes[ai].value;
        if start + len > x.cols() {
            return Err(AutodiffError::Invalid {
                op: "slice_cols",
                msg: format!("columns {start}..{} out of range for {:?}", start + len, x.shape()),
            });
        }
        let mut data = Vec::with_capacity(x.rows() * len);
        for r in 0..x.rows() {
            data.extend_from_slice(&x.row_slice(r)[start..start + len]);
        }
        let out = Tensor::new(x.rows(), len, data)?;
        let needs = self.needs(&[ai]);
        Ok(self.push(out, Op::SliceCols { src: ai, start }, needs))
    }

    /// Selects rows by index (repeats allowed).
    pub fn gather_rows(&mut self, a: Var, rows: &[usize]) -> Result<Var> {
        let ai = self.check(a)?;
        let x = &self.nodes[ai].value;
        if let Some(&bad) = rows.iter().find(|&&r| r >= x.rows()) {
            return Err(AutodiffError::Invalid {
                op: "gather_rows",
                msg: format!("row {bad} out of range for {:?}", x.shape()),
            });
        }
        let mut data = Vec::with_capacity(rows.len() * x.cols());
        for &r in rows {
            data.extend_from_slice(x.row_slice(r));
        }
        let out = Tensor::new(rows.len(), x.cols(), data)?;
        let needs = self.needs(&[ai]);
        Ok(self.push(out, Op::GatherRows { src: ai, rows: rows.to_vec() }, needs))
    }

    /// Embedding lookup: one row of `table` per id.
    pub fn embedding(&mut self, table: Var, ids: &[usize]) -> Result<Var> {
        self.gather_rows(table, ids)
    }

    pub fn slice_rows(&mut self, a: Var, start: usize, len: usize) -> Result<Var> {
        let rows: Vec<usize> = (start..start + len).collect();
        self.gather_rows(a, &rows)
    }

    pub fn sigmoid(&mut self, a: Var) -> Result<Var> {
        self.unary(a, Op::Sigmoid, |v| F::one() / (F::one() + (-v).exp()))
    }

    pub fn tanh(&mut self, a: Var) -> Result<Var> {
        self.unary(a, Op::Tanh, |v| v.tanh())
    }

    pub fn leaky_relu(&mut self, a: Var, slope: F) -> Result<Var> {
        let ai = self.check(a)?;
        let x = &self.nodes[ai].value;
        let data = x
            .data()
            .iter()
            .map(|&v| if v > F::zero() { v } else { v * slope })
            .collect();
        let out = Tensor::new(x.rows(), x.cols(), data)?;
        let needs = self.needs(&[ai]);
        Ok(self.push(out, Op::LeakyRelu(ai, slope), needs))
    }

    /// `max(x, 0)`.
    pub fn relu(&mut self, a: Var) -> Result<Var> {
        self.unary(a, Op::Relu, |v| v.max(F::zero()))
    }

    pub fn ln(&mut self, a: Var) -> Result<Var> {
        self.unary(a, Op::Ln, |v| v.ln())
    }

    /// Elementwise clamp into `[lo, hi]`; the gradient is zero outside.
    pub fn clamp(&mut self, a: Var, lo: F, hi: F) -> Result<Var> {
        let ai = self.check(a)?;
        let x = &self.nodes[ai].value;
        let data = x.data().iter().map(|&v| v.max(lo).min(hi)).collect();
        let out = Tensor::new(x.rows(), x.cols(), data)?;
        let needs = self.needs(&[ai]);
        Ok(self.push(out, Op::Clamp { src: ai, lo, hi }, needs))
    }

    /// Row-wise softmax over the last axis.
    pub fn softmax(&mut self, a: Var) -> Result<Var> {
        let ai = self.check(a)?;
        let x = &self.nodes[ai].value;
        let mut data = x.data().to_vec();
        for row in data.chunks_mut(x.cols().max(1)) {
            softmax_in_place(row, None);
        }
        let out = Tensor::new(x.rows(), x.cols(), data)?;
        let needs = self.needs(&[ai]);
        Ok(self.push(out, Op::Softmax(ai), needs))
    }

    /// Row-wise softmax restricted to entries where `mask` is true. Masked
    /// entries are exactly zero; a row with no admitted entry is all zeros.
    pub fn masked_softmax(&mut self, a: Var, mask: &[bool]) -> Result<Var> {
        let ai = self.check(a)?;
        let x = &self.nodes[ai].value;
        if mask.len() != x.len() {
            return Err(AutodiffError::Invalid {
                op: "masked_softmax",
                msg: format!("mask of {} entries for {:?}", mask.len(), x.shape()),
            });
        }
        let cols = x.cols().max(1);
        let mut data = x.data().to_vec();
        for (row, m) in data.chunks_mut(cols).zip(mask.chunks(cols)) {
            softmax_in_place(row, Some(m));
        }
        let out = Tensor::new(x.rows(), x.cols(), data)?;
        let needs = self.needs(&[ai]);
        Ok(self.push(out, Op::MaskedSoftmax(ai), needs))
    }

    pub fn sum(&mut self, a: Var) -> Result<Var> {
        let ai = self.check(a)?;
        let s = self.nodes[ai].value.data().iter().copied().sum();
        let needs = self.needs(&[ai]);
        Ok(self.push(Tensor::scalar(s), Op::Sum(ai), needs))
    }

    pub fn mean(&mut self, a: Var) -> Result<Var> {
        let ai = self.check(a)?;
        let x = &self.nodes[ai].value;
        if x.is_empty() {
            return Err(AutodiffError::Invalid { op: "mean", msg: "empty tensor".into() });
        }
        let s: F = x.data().iter().copied().sum();
        let out = Tensor::scalar(s / F::of(x.len() as f64));
        let needs = self.needs(&[ai]);
        Ok(self.push(out, Op::Mean(ai), needs))
    }

    /// Reverse pass from a `1 x 1` loss. Runs at most once per tape.
    pub fn backward(&mut self, loss: Var) -> Result<()> {
        let li = self.check(loss)?;
        if self.backward_done {
            return Err(AutodiffError::BackwardTwice);
        }
        let shape = self.nodes[li].value.shape();
        if shape != (1, 1) {
            return Err(AutodiffError::NonScalarLoss(shape));
        }
        self.backward_done = true;
        let mut grads: Vec<Option<Vec<F>>> = vec![None; self.nodes.len()];
        grads[li] = Some(vec![F::one()]);

        for idx in (0..=li).rev() {
            if !self.nodes[idx].needs_grad {
                continue;
            }
            let (before, rest) = grads.split_at_mut(idx);
            let Some(g) = rest[0].as_deref() else { continue };
            let node = &self.nodes[idx];
            let y = &node.value;
            let mut acc = Acc { nodes: &self.nodes, grads: before };
            match &node.op {
                Op::Leaf | Op::Constant => {}
                Op::MatMul(a, b) => {
                    let (m, k) = self.nodes[*a].value.shape();
                    let n = y.cols();
                    if acc.wants(*a) {
                        let ga = matmul_nt(g, self.nodes[*b].value.data(), m, n, k);
                        acc.add(*a, &ga);
                    }
                    if acc.wants(*b) {
                        let gb = matmul_tn(self.nodes[*a].value.data(), g, m, k, n);
                        acc.add(*b, &gb);
                    }
                }
                Op::MatMulNt(a, b) => {
                    let (m, k) = self.nodes[*a].value.shape();
                    let n = y.cols();
                    if acc.wants(*a) {
                        let ga = matmul(g, self.nodes[*b].value.data(), m, n, k);
                        acc.add(*a, &ga);
                    }
                    if acc.wants(*b) {
                        let gb = matmul_tn(g, self.nodes[*a].value.data(), m, n, k);
                        acc.add(*b, &gb);
                    }
                }
                Op::Add(a, b) => {
                    acc.add(*a, g);
                    acc.add(*b, g);
                }
                Op::Sub(a, b) => {
                    acc.add(*a, g);
                    let neg: Vec<F> = g.iter().map(|&v| -v).collect();
                    acc.add(*b, &neg);
                }
                Op::Mul(a, b) => {
                    let (x, z) = (self.nodes[*a].value.data(), self.nodes[*b].value.data());
                    if acc.wants(*a) {
                        let ga: Vec<F> = g.iter().zip(z).map(|(&g, &z)| g * z).collect();
                        acc.add(*a, &ga);
                    }
                    if acc.wants(*b) {
                        let gb: Vec<F> = g.iter().zip(x).map(|(&g, &x)| g * x).collect();
                        acc.add(*b, &gb);
                    }
                }
                Op::AddRow(a, b) => {
                    acc.add(*a, g);
                    if acc.wants(*b) {
                        let n = y.cols();
                        let mut gb = vec![F::zero(); n];
                        for row in g.chunks(n) {
                            for (s, &v) in gb.iter_mut().zip(row) {
                                *s = *s + v;
                            }
                        }
                        acc.add(*b, &gb);
                    }
                }
                Op::Scale(a, s) => {
                    let ga: Vec<F> = g.iter().map(|&v| v * *s).collect();
                    acc.add(*a, &ga);
                }
                Op::AddScalar(a) => acc.add(*a, g),
                Op::ConcatCols(parts) => {
                    let mut offset = 0;
                    let total = y.cols();
                    for &p in parts {
                        let w = self.nodes[p].value.cols();
                        if acc.wants(p) {
                            let mut gp = Vec::with_capacity(y.rows() * w);
                            for row in g.chunks(total) {
                                gp.extend_from_slice(&row[offset..offset + w]);
                            }
                            acc.add(p, &gp);
                        }
                        offset += w;
                    }
                }
                Op::ConcatRows(parts) => {
                    let mut offset = 0;
                    for &p in parts {
                        let len = self.nodes[p].value.len();
                        acc.add(p, &g[offset..offset + len]);
                        offset += len;
                    }
                }
                Op::SliceCols { src, start } => {
                    if acc.wants(*src) {
                        let (rows, cols) = self.nodes[*src].value.shape();
                        let w = y.cols();
                        let mut gs = vec![F::zero(); rows * cols];
                        for r in 0..rows {
                            gs[r * cols + start..r * cols + start + w]
                                .copy_from_slice(&g[r * w..(r + 1) * w]);
                        }
                        acc.add(*src, &gs);
                    }
                }
                Op::GatherRows { src, rows } => {
                    if acc.wants(*src) {
                        let cols = y.cols();
                        let buf = acc.buffer(*src);
                        for (k, &r) in rows.iter().enumerate() {
                            for c in 0..cols {
                                buf[r * cols + c] = buf[r * cols + c] + g[k * cols + c];
                            }
                        }
                    }
                }
                Op::Sigmoid(a) => {
                    let ga: Vec<F> = g
                        .iter()
                        .zip(y.data())
                        .map(|(&g, &s)| g * s * (F::one() - s))
                        .collect();
                    acc.add(*a, &ga);
                }
                Op::Tanh(a) => {
                    let ga: Vec<F> = g
                        .iter()
                        .zip(y.data())
                        .map(|(&g, &t)| g * (F::one() - t * t))
                        .collect();
                    acc.add(*a, &ga);
                }
                Op::LeakyRelu(a, slope) => {
                    let x = self.nodes[*a].value.data();
                    let ga: Vec<F> = g
                        .iter()
                        .zip(x)
                        .map(|(&g, &x)| if x > F::zero() { g } else { g * *slope })
                        .collect();
                    acc.add(*a, &ga);
                }
                Op::Relu(a) => {
                    let x = self.nodes[*a].value.data();
                    let ga: Vec<F> = g
                        .iter()
                        .zip(x)
                        .map(|(&g, &x)| if x > F::zero() { g } else { F::zero() })
                        .collect();
                    acc.add(*a, &ga);
                }
                Op::Ln(a) => {
                    let x = self.nodes[*a].value.data();
                    let ga: Vec<F> = g.iter().zip(x).map(|(&g, &x)| g / x).collect();
                    acc.add(*a, &ga);
                }
                Op::Clamp { src, lo, hi } => {
                    let x = self.nodes[*src].value.data();
                    let ga: Vec<F> = g
                        .iter()
                        .zip(x)
                        .map(|(&g, &x)| if x >= *lo && x <= *hi { g } else { F::zero() })
                        .collect();
                    acc.add(*src, &ga);
                }
                Op::Softmax(a) | Op::MaskedSoftmax(a) => {
                    let cols = y.cols().max(1);
                    let mut ga = Vec::with_capacity(y.len());
                    for (gr, yr) in g.chunks(cols).zip(y.data().chunks(cols)) {
                        let dot: F = gr.iter().zip(yr).map(|(&g, &y)| g * y).sum();
                        ga.extend(gr.iter().zip(yr).map(|(&g, &y)| y * (g - dot)));
                    }
                    acc.add(*a, &ga);
                }
                Op::Sum(a) => {
                    let n = self.nodes[*a].value.len();
                    acc.add(*a, &vec![g[0]; n]);
                }
                Op::Mean(a) => {
                    let n = self.nodes[*a].value.len();
                    acc.add(*a, &vec![g[0] / F::of(n as f64); n]);
                }
            }
        }
        self.grads = grads;
        Ok(())
    }
}

struct Acc<'a, F> {
    nodes: &'a [Node<F>],
    grads: &'a mut [Option<Vec<F>>],
}

impl<F: Real> Acc<'_, F> {
    fn wants(&self, i: usize) -> bool {
        self.nodes[i].needs_grad
    }

    fn buffer(&mut self, i: usize) -> &mut Vec<F> {
        let n = self.nodes[i].value.len();
        self.grads[i].get_or_insert_with(|| vec![F::zero(); n])
    }

    fn add(&mut self, i: usize, g: &[F]) {
        if !self.wants(i) {
            return;
        }
        let buf = self.buffer(i);
        for (b, &v) in buf.iter_mut().zip(g) {
            *b = *b + v;
        }
    }
}

fn softmax_in_place<F: Real>(row: &mut [F], mask: Option<&[bool]>) {
    let admitted = |j: usize| mask.is_none_or(|m| m[j]);
    let max = row
        .iter()
        .enumerate()
        .filter(|(j, _)| admitted(*j))
        .map(|(_, &v)| v)
        .fold(F::neg_infinity(), F::max);
    if max == F::neg_infinity() {
        row.iter_mut().for_each(|v| *v = F::zero());
        return;
    }
    let mut total = F::zero();
    for (j, v) in row.iter_mut().enumerate() {
        *v = if admitted(j) { (*v - max).exp() } else { F::zero() };
        total = total + *v;
    }
    for v in row.iter_mut() {
        *v = *v / total;
    }
}
