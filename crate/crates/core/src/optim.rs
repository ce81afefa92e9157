//! Adam with bias-corrected moment estimates.

use num_traits::Float;
use alloc::vec::Vec;

use crate::error::{bail, Result};
use crate::params::NetworkParams;
use crate::{Real, Tensor};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for Adam {
    fn default() -> Self {
        Self { lr: 1e-4, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

/// First and second moment estimates, one tensor per parameter.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState<T> {
    pub m: Vec<Tensor<T>>,
    pub v: Vec<Tensor<T>>,
}

impl<T: Real> AdamState<T> {
    pub fn new(params: &NetworkParams<T>) -> Self {
        let zeros = || params.entries().iter().map(|e| Tensor::zeros(e.value.shape())).collect();
        Self { m: zeros(), v: zeros() }
    }
}

impl Adam {
    /// Applies step `t` (1-based) using the gradients stored in `params`.
    pub fn step<T: Real>(&self, params: &mut NetworkParams<T>, state: &mut AdamState<T>, t: u64) -> Result<()> {
        if t == 0 {
            bail!(Contract, "adam step index starts at 1");
        }
        if state.m.len() != params.len() || state.v.len() != params.len() {
            bail!(Dimension, "adam state covers {} tensors, network has {}", state.m.len(), params.len());
        }
        let (b1, b2) = (T::lit(self.beta1), T::lit(self.beta2));
        let c1 = T::lit(1.0 - Float::powi(self.beta1, t.min(i32::MAX as u64) as i32));
        let c2 = T::lit(1.0 - Float::powi(self.beta2, t.min(i32::MAX as u64) as i32));
        let (lr, eps) = (T::lit(self.lr), T::lit(self.eps));
        for ((entry, m), v) in params.entries_mut().iter_mut().zip(&mut state.m).zip(&mut state.v) {
            if m.shape() != entry.value.shape() || v.shape() != entry.value.shape() {
                bail!(Dimension, "adam state shape mismatch for {}", entry.name);
            }
            let g = entry.grad.data();
            let p = entry.value.data_mut();
            for (((p, &g), m), v) in p.iter_mut().zip(g).zip(m.data_mut()).zip(v.data_mut()) {
                *m = b1 * *m + (T::one() - b1) * g;
                *v = b2 * *v + (T::one() - b2) * g * g;
                let m_hat = *m / c1;
                let v_hat = *v / c2;
                *p -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }
}
