//! Central finite-difference verification of reverse-mode gradients.

use alloc::vec::Vec;

use super::{Tape, Var};
use crate::error::Result;
use crate::networks::Network;
use crate::params::Binding;
use crate::Tensor;

/// Default central-difference step.
pub const DEFAULT_STEP: f64 = 1e-6;

/// Outcome of a gradient check.
#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckResult {
    /// `‖analytic − numeric‖ / max(‖analytic‖, ‖numeric‖)` over the
    /// concatenation of all checked gradients.
    pub relative_error: f64,
    /// The same measure per checked tensor. Tensors whose true gradient is
    /// structurally zero (e.g. a bias feeding batch normalization) show
    /// values near 1 here without indicating a fault.
    pub per_tensor: Vec<f64>,
    /// Number of scalar entries perturbed.
    pub entries: usize,
}

/// Fixed projection weights that turn any output into a scalar loss with a
/// non-degenerate gradient.
fn projection(len: usize) -> Tensor<f64> {
    Tensor::from_fn(&[len], |i| {
        let x = (i as f64 * 0.618_033_988_749_895 + 0.25) % 1.0;
        x - 0.4
    })
}

fn project(tape: &mut Tape<f64>, y: Var) -> Result<Var> {
    if tape.value(y).len() == 1 {
        return Ok(y);
    }
    let len = tape.value(y).len();
    let flat = tape.reshape(y, &[len])?;
    let w = tape.constant(projection(len));
    let prod = tape.mul(flat, w)?;
    tape.sum_all(prod)
}

/// Squared norms of analytic, numeric and their difference.
fn sq_norms(analytic: &[f64], numeric: &[f64]) -> [f64; 3] {
    let mut s = [0.0; 3];
    for (a, n) in analytic.iter().zip(numeric) {
        s[0] += a * a;
        s[1] += n * n;
        s[2] += (a - n) * (a - n);
    }
    s
}

fn ratio(s: [f64; 3]) -> f64 {
    let scale = s[0].max(s[1]);
    if scale == 0.0 {
        0.0
    } else {
        num_traits::Float::sqrt(s[2] / scale)
    }
}

fn summarize(parts: Vec<[f64; 3]>, entries: usize) -> GradCheckResult {
    let mut total = [0.0; 3];
    for p in &parts {
        for k in 0..3 {
            total[k] += p[k];
        }
    }
    GradCheckResult { relative_error: ratio(total), per_tensor: parts.into_iter().map(ratio).collect(), entries }
}

/// Checks the gradients of `f` with respect to every entry of `inputs`.
/// Non-scalar outputs are reduced with fixed projection weights.
pub fn check_gradients(
    inputs: &[Tensor<f64>],
    step: f64,
    mut f: impl FnMut(&mut Tape<f64>, &[Var]) -> Result<Var>,
) -> Result<GradCheckResult> {
    let mut tape = Tape::new();
    let vars: Vec<Var> = inputs.iter().map(|t| tape.leaf(t.clone(), true)).collect();
    let y = f(&mut tape, &vars)?;
    let loss = project(&mut tape, y)?;
    tape.backward(loss)?;
    let analytic: Vec<Tensor<f64>> =
        vars.iter().zip(inputs).map(|(&v, t)| tape.grad(v).unwrap_or_else(|| Tensor::zeros(t.shape()))).collect();

    let mut eval = |values: &[Tensor<f64>]| -> Result<f64> {
        let mut tape = Tape::new();
        let vars: Vec<Var> = values.iter().map(|t| tape.constant(t.clone())).collect();
        let y = f(&mut tape, &vars)?;
        let loss = project(&mut tape, y)?;
        Ok(tape.value(loss).item())
    };

    let mut work: Vec<Tensor<f64>> = inputs.to_vec();
    let mut parts = Vec::with_capacity(inputs.len());
    let mut entries = 0;
    for i in 0..inputs.len() {
        let mut numeric = Vec::with_capacity(inputs[i].len());
        for j in 0..inputs[i].len() {
            let orig = work[i].data()[j];
            work[i].data_mut()[j] = orig + step;
            let plus = eval(&work)?;
            work[i].data_mut()[j] = orig - step;
            let minus = eval(&work)?;
            work[i].data_mut()[j] = orig;
            numeric.push((plus - minus) / (2.0 * step));
        }
        entries += numeric.len();
        parts.push(sq_norms(analytic[i].data(), &numeric));
    }
    Ok(summarize(parts, entries))
}

/// Checks the gradients of `f` with respect to every parameter of `net`.
pub fn check_network_gradients<N: Network<f64>>(
    net: &mut N,
    step: f64,
    mut f: impl FnMut(&mut N, &mut Tape<f64>, &Binding) -> Result<Var>,
) -> Result<GradCheckResult> {
    let mut tape = Tape::new();
    let bind = net.params().bind(&mut tape, true);
    let y = f(net, &mut tape, &bind)?;
    let loss = project(&mut tape, y)?;
    tape.backward(loss)?;
    let analytic: Vec<Tensor<f64>> = bind
        .vars()
        .iter()
        .zip(net.params().entries())
        .map(|(&v, e)| tape.grad(v).unwrap_or_else(|| Tensor::zeros(e.value.shape())))
        .collect();
    drop(tape);

    let mut eval = |net: &mut N| -> Result<f64> {
        let mut tape = Tape::new();
        let bind = net.params().bind(&mut tape, false);
        let y = f(net, &mut tape, &bind)?;
        let loss = project(&mut tape, y)?;
        Ok(tape.value(loss).item())
    };

    let mut parts = Vec::with_capacity(analytic.len());
    let mut entries = 0;
    for (i, grad) in analytic.iter().enumerate() {
        let mut numeric = Vec::with_capacity(grad.len());
        for j in 0..grad.len() {
            let orig = net.params().entries()[i].value.data()[j];
            net.params_mut().entries_mut()[i].value.data_mut()[j] = orig + step;
            let plus = eval(net)?;
            net.params_mut().entries_mut()[i].value.data_mut()[j] = orig - step;
            let minus = eval(net)?;
            net.params_mut().entries_mut()[i].value.data_mut()[j] = orig;
            numeric.push((plus - minus) / (2.0 * step));
        }
        entries += numeric.len();
        parts.push(sq_norms(grad.data(), &numeric));
    }
    Ok(summarize(parts, entries))
}
