//! Analytic gradients against central finite differences.

use std::fmt;

use crate::{ParamStore, Result, Session, Var};

const STEP: f64 = 1e-5;

/// Acceptance threshold for one gradient element: it passes when the
/// relative error is within `relative`, or the absolute error is within
/// `abs_floor` (for gradients too small for a meaningful ratio).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerance {
    pub relative: f64,
    pub abs_floor: f64,
}

impl Tolerance {
    /// Relative tolerance with an absolute floor two orders below it.
    pub fn relative(relative: f64) -> Self {
        Self { relative, abs_floor: relative * 1e-2 }
    }
}

impl Default for Tolerance {
    fn default() -> Self {
        Self::relative(1e-4)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParamCheck {
    pub name: String,
    pub elements: usize,
    /// Largest relative error among elements above the absolute floor.
    pub max_rel_err: f64,
    pub max_abs_err: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub params: Vec<ParamCheck>,
    pub tolerance: Tolerance,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.params.iter().all(|p| p.passed)
    }

    pub fn max_rel_err(&self) -> f64 {
        self.params.iter().map(|p| p.max_rel_err).fold(0.0, f64::max)
    }

    pub fn max_abs_err(&self) -> f64 {
        self.params.iter().map(|p| p.max_abs_err).fold(0.0, f64::max)
    }
}

impl fmt::Display for GradCheckReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for p in &self.params {
            writeln!(
                f,
                "  {:<40} n={:<6} rel={:.3e} abs={:.3e} {}",
                p.name,
                p.elements,
                p.max_rel_err,
                p.max_abs_err,
                if p.passed { "ok" } else { "FAIL" }
            )?;
        }
        Ok(())
    }
}

/// Checks every parameter the recipe touches. The recipe must build a
/// `1 x 1` loss and be a deterministic function of the parameter values.
pub fn grad_check<R>(store: &mut ParamStore<f64>, tol: Tolerance, recipe: R) -> Result<GradCheckReport>
where
    R: Fn(&mut Session<'_, f64>) -> Result<Var>,
{
    let (tape, bindings) = {
        let mut session = Session::new(store);
        let loss = recipe(&mut session)?;
        session.tape.backward(loss)?;
        session.finish()
    };
    let used: Vec<_> = bindings.used().collect();
    let mut analytic = store.clone();
    analytic.zero_grads();
    bindings.accumulate_into(&tape, &mut analytic, 1.0);
    drop(tape);

    let eval = |store: &ParamStore<f64>| -> Result<f64> {
        let mut session = Session::new(store);
        let loss = recipe(&mut session)?;
        Ok(session.tape.value(loss).data()[0])
    };

    let mut params = Vec::with_capacity(used.len());
    for id in used {
        let grad = analytic.get(id).grad.clone().unwrap_or_default();
        let n = store.get(id).value.len();
        let (mut max_rel, mut max_abs, mut passed) = (0.0f64, 0.0f64, true);
        for k in 0..n {
            let orig = store.get(id).value.data()[k];
            store.get_mut(id).value.data_mut()[k] = orig + STEP;
            let plus = eval(store)?;
            store.get_mut(id).value.data_mut()[k] = orig - STEP;
            let minus = eval(store)?;
            store.get_mut(id).value.data_mut()[k] = orig;

            let numeric = (plus - minus) / (2.0 * STEP);
            let a = grad.get(k).copied().unwrap_or(0.0);
            let diff = (a - numeric).abs();
            let scale = a.abs().max(numeric.abs());
            max_abs = max_abs.max(diff);
            if diff > tol.abs_floor {
                let rel = diff / scale;
                max_rel = max_rel.max(rel);
                if rel > tol.relative || !rel.is_finite() {
                    passed = false;
                }
            }
        }
        params.push(ParamCheck {
            name: store.get(id).name.clone(),
            elements: n,
            max_rel_err: max_rel,
            max_abs_err: max_abs,
            passed,
        });
    }
    Ok(GradCheckReport { params, tolerance: tol })
}
