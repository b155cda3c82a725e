//! Every op's backward rule against central finite differences on random
//! small shapes, at 64-bit.

use coguide_autodiff::{grad_check, Init, ParamId, ParamStore, Result, Session, Tensor, Tolerance, Var};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Case {
    store: ParamStore<f64>,
    rng: ChaCha8Rng,
}

impl Case {
    fn new(seed: u64) -> Self {
        Self { store: ParamStore::new(), rng: ChaCha8Rng::seed_from_u64(seed) }
    }

    fn param(&mut self, name: &str, rows: usize, cols: usize) -> ParamId {
        self.store.register(name, rows, cols, Init::Normal(1.0), &mut self.rng)
    }

    fn weights(&mut self, rows: usize, cols: usize) -> Tensor<f64> {
        let data = (0..rows * cols).map(|_| self.rng.random_range(-1.0..1.0)).collect();
        Tensor::new(rows, cols, data).unwrap()
    }

    /// Checks `sum(op(..) * random weights)`.
    fn check<B>(&mut self, out_shape: (usize, usize), build: B)
    where
        B: Fn(&mut Session<'_, f64>) -> Result<Var>,
    {
        let w = self.weights(out_shape.0, out_shape.1);
        let report = grad_check(&mut self.store, Tolerance::default(), |s| {
            let y = build(s)?;
            let c = s.tape.constant(w.clone());
            let z = s.tape.mul(y, c)?;
            s.tape.sum(z)
        })
        .unwrap();
        assert!(report.passed(), "{report}");
    }
}

fn dims() -> impl Strategy<Value = (usize, usize, usize, u64)> {
    (1usize..4, 1usize..5, 1usize..4, any::<u64>())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn matmul_and_matmul_nt((m, k, n, seed) in dims()) {
        let mut c = Case::new(seed);
        let a = c.param("a", m, k);
        let b = c.param("b", k, n);
        let bt = c.param("bt", n, k);
        c.check((m, n), |s| { let (x, y) = (s.param(a), s.param(b)); s.tape.matmul(x, y) });
        c.check((m, n), |s| { let (x, y) = (s.param(a), s.param(bt)); s.tape.matmul_nt(x, y) });
    }

    #[test]
    fn elementwise_binary((m, n, _, seed) in dims()) {
        let mut c = Case::new(seed);
        let a = c.param("a", m, n);
        let b = c.param("b", m, n);
        let r = c.param("r", 1, n);
        c.check((m, n), |s| { let (x, y) = (s.param(a), s.param(b)); s.tape.add(x, y) });
        c.check((m, n), |s| { let (x, y) = (s.param(a), s.param(b)); s.tape.sub(x, y) });
        c.check((m, n), |s| { let (x, y) = (s.param(a), s.param(b)); s.tape.mul(x, y) });
        c.check((m, n), |s| { let (x, y) = (s.param(a), s.param(r)); s.tape.add_row(x, y) });
        c.check((m, n), |s| { let x = s.param(a); s.tape.scale(x, -1.7) });
        c.check((m, n), |s| { let x = s.param(a); s.tape.add_scalar(x, 0.3) });
    }

    #[test]
    fn activations((m, n, _, seed) in dims()) {
        let mut c = Case::new(seed);
        let a = c.param("a", m, n);
        c.check((m, n), |s| { let x = s.param(a); s.tape.sigmoid(x) });
        c.check((m, n), |s| { let x = s.param(a); s.tape.tanh(x) });
        c.check((m, n), |s| { let x = s.param(a); s.tape.leaky_relu(x, 0.2) });
        c.check((m, n), |s| { let x = s.param(a); s.tape.relu(x) });
        c.check((m, n), |s| { let x = s.param(a); s.tape.clamp(x, -0.5, 0.5) });
        c.check((m, n), |s| { let x = s.param(a); s.tape.softmax(x) });
        c.check((m, n), |s| {
            let x = s.param(a);
            let p = s.tape.sigmoid(x)?;
            s.tape.ln(p)
        });
    }

    #[test]
    fn masked_softmax_gradient((m, n, _, seed) in dims()) {
        let mut c = Case::new(seed);
        let a = c.param("a", m, n);
        let mask: Vec<bool> = (0..m * n).map(|_| c.rng.random_bool(0.6)).collect();
        c.check((m, n), move |s| { let x = s.param(a); s.tape.masked_softmax(x, &mask) });
    }

    #[test]
    fn structural((m, k, n, seed) in dims()) {
        let mut c = Case::new(seed);
        let a = c.param("a", m, k);
        let b = c.param("b", m, n);
        let d = c.param("d", n, k);
        c.check((m, k + n), |s| { let (x, y) = (s.param(a), s.param(b)); s.tape.concat_cols(&[x, y]) });
        c.check((m + n, k), |s| { let (x, y) = (s.param(a), s.param(d)); s.tape.concat_rows(&[x, y]) });
        c.check((m, 1), |s| { let x = s.param(a); s.tape.slice_cols(x, k - 1, 1) });
        let ids: Vec<usize> = (0..5).map(|i| (i * 7 + seed as usize) % m).collect();
        c.check((5, k), move |s| { let x = s.param(a); s.tape.embedding(x, &ids) });
        c.check((1, 1), |s| { let x = s.param(a); s.tape.sum(x) });
        c.check((1, 1), |s| { let x = s.param(a); s.tape.mean(x) });
    }

    #[test]
    fn softmax_rows_are_distributions(rows in 1usize..6, cols in 1usize..8, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data: Vec<f64> = (0..rows * cols).map(|_| rng.random_range(-30.0..30.0)).collect();
        let mut tape = coguide_autodiff::Tape::<f64>::new();
        let x = tape.constant(Tensor::new(rows, cols, data).unwrap());
        let y = tape.softmax(x).unwrap();
        for r in 0..rows {
            let row = tape.value(y).row_slice(r);
            prop_assert!(row.iter().all(|&v| v >= 0.0));
            prop_assert!((row.iter().sum::<f64>() - 1.0).abs() <= 1e-6);
        }
    }
}

#[test]
fn composite_graph_matches_finite_differences() {
    let mut c = Case::new(5);
    let x = c.param("x", 3, 4);
    let w = c.param("w", 4, 4);
    let b = c.param("b", 1, 4);
    c.check((3, 4), |s| {
        let (x, w, b) = (s.param(x), s.param(w), s.param(b));
        let h = s.tape.matmul(x, w)?;
        let h = s.tape.add_row(h, b)?;
        let h = s.tape.tanh(h)?;
        let att = s.tape.matmul_nt(h, h)?;
        let att = s.tape.softmax(att)?;
        let out = s.tape.matmul(att, h)?;
        let gate = s.tape.sigmoid(out)?;
        s.tape.mul(gate, h)
    });
}
