//! Adam with decoupled weight decay.

use crate::{AutodiffError, ParamStore, Real, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { learning_rate: 1e-3, weight_decay: 1e-6, beta1: 0.9, beta2: 0.999, epsilon: 1e-8 }
    }
}

#[derive(Debug, Clone)]
pub struct Adam<F> {
    pub config: AdamConfig,
    step: u64,
    first: Vec<Vec<F>>,
    second: Vec<Vec<F>>,
}

impl<F: Real> Adam<F> {
    pub fn new(config: AdamConfig, params: &ParamStore<F>) -> Self {
        let zeros = |_| Vec::new();
        Self {
            config,
            step: 0,
            first: (0..params.len()).map(zeros).collect(),
            second: (0..params.len()).map(zeros).collect(),
        }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    /// One update of every parameter from its accumulated gradient, then
    /// clears the gradients. Fails before touching anything if a gradient
    /// is missing.
    pub fn step(&mut self, params: &mut ParamStore<F>) -> Result<()> {
        if let Some((_, p)) = params.iter().find(|(_, p)| p.grad.is_none()) {
            return Err(AutodiffError::MissingGrad(p.name.clone()));
        }
        if self.first.len() != params.len() {
            return Err(AutodiffError::Invalid {
                op: "adam_step",
                msg: format!("state for {} params, store has {}", self.first.len(), params.len()),
            });
        }
        self.step += 1;
        let c = self.config;
        let t = self.step as i32;
        let (b1, b2) = (F::of(c.beta1), F::of(c.beta2));
        let correction1 = F::one() - b1.powi(t);
        let correction2 = F::one() - b2.powi(t);
        let (lr, wd, eps) = (F::of(c.learning_rate), F::of(c.weight_decay), F::of(c.epsilon));

        for (i, p) in params.iter_mut().enumerate() {
            let grad = p.grad.take().expect("checked above");
            let n = grad.len();
            let m = &mut self.first[i];
            let v = &mut self.second[i];
            if m.len() != n {
                m.resize(n, F::zero());
                v.resize(n, F::zero());
            }
            for (k, w) in p.value.data_mut().iter_mut().enumerate() {
                let g = grad[k];
                m[k] = b1 * m[k] + (F::one() - b1) * g;
                v[k] = b2 * v[k] + (F::one() - b2) * g * g;
                let m_hat = m[k] / correction1;
                let v_hat = v[k] / correction2;
                *w = *w - lr * (m_hat / (v_hat.sqrt() + eps) + wd * *w);
            }
        }
        Ok(())
    }
}
