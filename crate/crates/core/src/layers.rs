//! Dense and recurrent building blocks.

use coguide_autodiff::{Init, ParamId, ParamStore, Real, Session, Tensor, Var};
use rand::Rng;

use crate::{Error, Result};

/// `x W + b` with `W` stored as `in x out`.
#[derive(Debug, Clone)]
pub struct Linear {
    pub weight: ParamId,
    pub bias: Option<ParamId>,
    pub in_dim: usize,
    pub out_dim: usize,
}

impl Linear {
    pub fn register<F: Real, R: Rng + ?Sized>(
        store: &mut ParamStore<F>,
        name: &str,
        in_dim: usize,
        out_dim: usize,
        bias: bool,
        rng: &mut R,
    ) -> Self {
        let weight = store.register(format!("{name}.weight"), in_dim, out_dim, Init::FanIn, rng);
        let bias = bias.then(|| store.register(format!("{name}.bias"), 1, out_dim, Init::Zeros, rng));
        Self { weight, bias, in_dim, out_dim }
    }

    pub fn forward<F: Real>(&self, s: &mut Session<'_, F>, x: Var) -> Result<Var> {
        let w = s.param(self.weight);
        let mut y = s.tape.matmul(x, w)?;
        if let Some(b) = self.bias {
            let b = s.param(b);
            y = s.tape.add_row(y, b)?;
        }
        Ok(y)
    }
}

/// Inverted dropout: zeroes each entry with probability `p` and scales the
/// survivors by `1 / (1 - p)`.
pub fn dropout<F: Real, R: Rng + ?Sized>(s: &mut Session<'_, F>, x: Var, p: f64, rng: &mut R) -> Result<Var> {
    if p <= 0.0 {
        return Ok(x);
    }
    let (rows, cols) = s.tape.shape(x);
    let keep = F::of(1.0 / (1.0 - p));
    let mask = (0..rows * cols)
        .map(|_| if rng.random_bool(p) { F::zero() } else { keep })
        .collect();
    let mask = s.tape.constant(Tensor::new(rows, cols, mask)?);
    Ok(s.tape.mul(x, mask)?)
}

/// One LSTM direction; gates are laid out `[input, forget, cell, output]`.
#[derive(Debug, Clone)]
pub struct LstmCell {
    pub w_input: ParamId,
    pub w_hidden: ParamId,
    pub bias: ParamId,
    pub hidden: usize,
}

impl LstmCell {
    fn register<F: Real, R: Rng + ?Sized>(
        store: &mut ParamStore<F>,
        name: &str,
        input: usize,
        hidden: usize,
        rng: &mut R,
    ) -> Self {
        Self {
            w_input: store.register(format!("{name}.w_ih"), input, 4 * hidden, Init::FanIn, rng),
            w_hidden: store.register(format!("{name}.w_hh"), hidden, 4 * hidden, Init::FanIn, rng),
            bias: store.register(format!("{name}.bias"), 1, 4 * hidden, Init::Zeros, rng),
            hidden,
        }
    }

    /// Hidden state after each step, visiting rows in `order`. Initial
    /// hidden and cell states are zero.
    fn run<F: Real>(&self, s: &mut Session<'_, F>, x: Var, order: &[usize]) -> Result<Vec<Var>> {
        let h = self.hidden;
        let w_ih = s.param(self.w_input);
        let w_hh = s.param(self.w_hidden);
        let b = s.param(self.bias);
        let projected = s.tape.matmul(x, w_ih)?;
        let projected = s.tape.add_row(projected, b)?;

        let mut states = Vec::with_capacity(order.len());
        let mut prev: Option<(Var, Var)> = None;
        for &t in order {
            let mut pre = s.tape.gather_rows(projected, &[t])?;
            if let Some((h_prev, _)) = prev {
                let rec = s.tape.matmul(h_prev, w_hh)?;
                pre = s.tape.add(pre, rec)?;
            }
            let act = s.tape.sigmoid(pre)?;
            let input_gate = s.tape.slice_cols(act, 0, h)?;
            let output_gate = s.tape.slice_cols(act, 3 * h, h)?;
            let candidate = s.tape.slice_cols(pre, 2 * h, h)?;
            let candidate = s.tape.tanh(candidate)?;
            let mut cell = s.tape.mul(input_gate, candidate)?;
            if let Some((_, c_prev)) = prev {
                let forget_gate = s.tape.slice_cols(act, h, h)?;
                let kept = s.tape.mul(forget_gate, c_prev)?;
                cell = s.tape.add(cell, kept)?;
            }
            let squashed = s.tape.tanh(cell)?;
            let hidden = s.tape.mul(output_gate, squashed)?;
            states.push(hidden);
            prev = Some((hidden, cell));
        }
        Ok(states)
    }
}

/// Bidirectional LSTM; row `i` of the output is the forward state after
/// token `i` concatenated with the backward state after token `i`.
#[derive(Debug, Clone)]
pub struct BiLstm {
    pub forward: LstmCell,
    pub backward: LstmCell,
    pub input_dim: usize,
    pub output_dim: usize,
}

impl BiLstm {
    /// `output_dim` is split evenly between the two directions.
    pub fn register<F: Real, R: Rng + ?Sized>(
        store: &mut ParamStore<F>,
        name: &str,
        input_dim: usize,
        output_dim: usize,
        rng: &mut R,
    ) -> Self {
        assert!(output_dim.is_multiple_of(2), "BiLSTM width must be even");
        let half = output_dim / 2;
        Self {
            forward: LstmCell::register(store, &format!("{name}.fwd"), input_dim, half, rng),
            backward: LstmCell::register(store, &format!("{name}.bwd"), input_dim, half, rng),
            input_dim,
            output_dim,
        }
    }

    pub fn forward<F: Real>(&self, s: &mut Session<'_, F>, seq: Var) -> Result<Var> {
        let (n, d) = s.tape.shape(seq);
        if n == 0 {
            return Err(Error::Empty("BiLSTM input sequence"));
        }
        if d != self.input_dim {
            return Err(Error::Contract(format!(
                "BiLSTM expects width {}, got {d}",
                self.input_dim
            )));
        }
        let order: Vec<usize> = (0..n).collect();
        let reversed: Vec<usize> = (0..n).rev().collect();
        let fwd = self.forward.run(s, seq, &order)?;
        let mut bwd = self.backward.run(s, seq, &reversed)?;
        bwd.reverse();
        let fwd = s.tape.concat_rows(&fwd)?;
        let bwd = s.tape.concat_rows(&bwd)?;
        Ok(s.tape.concat_cols(&[fwd, bwd])?)
    }
}

/// Two-layer head `W1 act(W2 h + b2) + b1`, applied row-wise.
#[derive(Debug, Clone)]
pub struct MlpHead {
    pub hidden: Linear,
    pub output: Linear,
    pub slope: f64,
}

impl MlpHead {
    pub fn register<F: Real, R: Rng + ?Sized>(
        store: &mut ParamStore<F>,
        name: &str,
        input: usize,
        outputs: usize,
        slope: f64,
        rng: &mut R,
    ) -> Self {
        Self {
            hidden: Linear::register(store, &format!("{name}.hidden"), input, input, true, rng),
            output: Linear::register(store, &format!("{name}.out"), input, outputs, true, rng),
            slope,
        }
    }

    /// Pre-activation logits.
    pub fn logits<F: Real>(&self, s: &mut Session<'_, F>, h: Var) -> Result<Var> {
        let z = self.hidden.forward(s, h)?;
        let z = s.tape.leaky_relu(z, F::of(self.slope))?;
        self.output.forward(s, z)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn zero_weights_and_inputs_give_zero_states() {
        let mut rng = rand::rngs::StdRng::seed_from_u64(0);
        let mut store = ParamStore::<f64>::new();
        let lstm = BiLstm::register(&mut store, "l", 3, 4, &mut rng);
        for p in store.iter_mut() {
            p.value.data_mut().fill(0.0);
        }
        let mut s = Session::new(&store);
        let x = s.tape.constant(Tensor::zeros(5, 3));
        let y = lstm.forward(&mut s, x).unwrap();
        assert_eq!(s.tape.shape(y), (5, 4));
        assert!(s.tape.value(y).data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn empty_sequence_is_an_error() {
        let mut rng = rand::rngs::StdRng::seed_from_u64(0);
        let mut store = ParamStore::<f64>::new();
        let lstm = BiLstm::register(&mut store, "l", 3, 4, &mut rng);
        let mut s = Session::new(&store);
        let x = s.tape.constant(Tensor::zeros(0, 3));
        assert!(matches!(lstm.forward(&mut s, x), Err(Error::Empty(_))));
    }
}
