//! Central finite differences, for checking analytic gradients.
//!
//! Only forward evaluations are used here, so the numeric gradient is
//! independent of the backward rules it checks.

use super::{Tape, Tensor, Var};
use crate::error::Result;

#[derive(Debug, Clone)]
pub struct GradReport {
    pub analytic: Vec<Tensor>,
    pub numeric: Vec<Tensor>,
    /// Largest `|analytic - numeric|` over all entries.
    pub max_abs_error: f64,
    /// Largest `|analytic - numeric| / max(|analytic|, |numeric|, floor)`.
    pub max_rel_error: f64,
}

/// Denominator floor for relative errors of near-zero gradients.
pub const REL_FLOOR: f64 = 1e-3;

fn evaluate<F>(inputs: &[Tensor], f: &F) -> Result<f64>
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var>,
{
    let mut tape = Tape::new();
    let vars: Vec<Var> = inputs.iter().map(|t| tape.leaf(t.clone())).collect();
    let out = f(&mut tape, &vars)?;
    Ok(tape.value(out).data().iter().sum())
}

/// Compares the tape's gradients of `f` against central differences with step `eps`.
///
/// `f` receives one leaf per input and must return a scalar.
pub fn check_gradients<F>(inputs: &[Tensor], eps: f64, f: F) -> Result<GradReport>
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var>,
{
    let mut tape = Tape::new();
    let vars: Vec<Var> = inputs.iter().map(|t| tape.leaf(t.clone())).collect();
    let out = f(&mut tape, &vars)?;
    tape.backward(out)?;
    let analytic: Vec<Tensor> = vars
        .iter()
        .zip(inputs)
        .map(|(v, t)| tape.grad(*v).unwrap_or_else(|| Tensor::zeros(t.shape())))
        .collect();

    let mut perturbed = inputs.to_vec();
    let mut numeric = Vec::with_capacity(inputs.len());
    for i in 0..inputs.len() {
        let mut grad = Tensor::zeros(inputs[i].shape());
        for j in 0..inputs[i].len() {
            let orig = inputs[i].data()[j];
            perturbed[i].data_mut()[j] = orig + eps;
            let plus = evaluate(&perturbed, &f)?;
            perturbed[i].data_mut()[j] = orig - eps;
            let minus = evaluate(&perturbed, &f)?;
            perturbed[i].data_mut()[j] = orig;
            grad.data_mut()[j] = (plus - minus) / (2.0 * eps);
        }
        numeric.push(grad);
    }

    let mut max_abs_error = 0.0f64;
    let mut max_rel_error = 0.0f64;
    for (a, n) in analytic.iter().zip(&numeric) {
        for (&x, &y) in a.data().iter().zip(n.data()) {
            let err = (x - y).abs();
            max_abs_error = max_abs_error.max(err);
            max_rel_error = max_rel_error.max(err / x.abs().max(y.abs()).max(REL_FLOOR));
        }
    }
    Ok(GradReport {
        analytic,
        numeric,
        max_abs_error,
        max_rel_error,
    })
}
