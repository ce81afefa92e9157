//! Define-by-run reverse-mode automatic differentiation.
//!
//! A [`Tape`] owns every value produced during a forward pass. Operations
//! append a node holding the output and whatever the backward rule needs;
//! [`Tape::backward`] walks the nodes in reverse execution order and
//! accumulates gradients into every node that requires them.

mod conv;
pub mod gradcheck;
mod kernels;
mod norm;
mod pointwise;
mod reduce;
mod shape;

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{bail, Result};
use crate::{Error, Real, Tensor};

pub use conv::Padding;
pub use norm::{NormMode, RunningStats};
pub use pointwise::{Activation, BinaryOp};
pub use reduce::ReduceOp;
pub use shape::PoolKind;

use conv::ConvGeom;

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

pub(crate) enum Op<T> {
    Leaf,
    Conv2d { input: Var, weight: Var, bias: Var, geom: ConvGeom },
    ConvTranspose2d { input: Var, weight: Var, bias: Var, geom: ConvGeom },
    BatchNorm { input: Var, gamma: Var, beta: Var, xhat: Vec<T>, inv_std: Vec<T>, batch_stats: bool },
    Activation { input: Var, kind: Activation },
    Binary { a: Var, b: Var, kind: BinaryOp },
    Affine { input: Var, scale: T },
    Clamp { input: Var, lo: T, hi: T },
    Ln { input: Var },
    Pool { input: Var, kind: PoolKind, kernel: usize, stride: usize, argmax: Vec<usize> },
    UpsampleNearest { input: Var, factor: usize },
    Concat { inputs: Vec<Var> },
    SliceChannels { input: Var, start: usize },
    Reshape { input: Var },
    Reduce { input: Var, kind: ReduceOp, axes: Vec<bool>, argidx: Vec<usize> },
}

struct Node<T> {
    value: Tensor<T>,
    grad: Option<Vec<T>>,
    requires_grad: bool,
    op: Op<T>,
}

/// Ordered record of executed operations.
pub struct Tape<T: Real> {
    nodes: Vec<Node<T>>,
    checked: bool,
}

impl<T: Real> Default for Tape<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Real> Tape<T> {
    /// A tape in checked mode: every op output is scanned for NaN/inf.
    pub fn new() -> Self {
        Self { nodes: Vec::new(), checked: true }
    }

    pub fn unchecked() -> Self {
        Self { nodes: Vec::new(), checked: false }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Records a leaf. Gradients are accumulated for it when `requires_grad`.
    pub fn leaf(&mut self, value: Tensor<T>, requires_grad: bool) -> Var {
        self.nodes.push(Node { value, grad: None, requires_grad, op: Op::Leaf });
        Var(self.nodes.len() - 1)
    }

    pub fn constant(&mut self, value: Tensor<T>) -> Var {
        self.leaf(value, false)
    }

    pub fn param(&mut self, value: Tensor<T>) -> Var {
        self.leaf(value, true)
    }

    /// Copies `var`'s value into a new leaf that stops gradient flow.
    pub fn detach(&mut self, var: Var) -> Var {
        let value = self.value(var).clone();
        self.constant(value)
    }

    pub fn value(&self, var: Var) -> &Tensor<T> {
        &self.nodes[var.0].value
    }

    pub fn shape(&self, var: Var) -> &[usize] {
        self.nodes[var.0].value.shape()
    }

    pub fn requires_grad(&self, var: Var) -> bool {
        self.nodes[var.0].requires_grad
    }

    /// Accumulated gradient, present once a backward pass reached `var`.
    pub fn grad(&self, var: Var) -> Option<Tensor<T>> {
        let node = &self.nodes[var.0];
        node.grad.as_ref().map(|g| Tensor::new(node.value.shape(), g.clone()).expect("grad shape"))
    }

    pub fn grad_data(&self, var: Var) -> Option<&[T]> {
        self.nodes[var.0].grad.as_deref()
    }

    pub fn zero_grad(&mut self) {
        for node in &mut self.nodes {
            node.grad = None;
        }
    }

    /// Drops every saved intermediate, keeping leaf values and gradients.
    pub fn release_intermediates(&mut self) {
        for node in &mut self.nodes {
            if !matches!(node.op, Op::Leaf) {
                node.op = Op::Leaf;
                node.value = Tensor::zeros(&[0]);
                node.grad = None;
            }
        }
    }

    pub(crate) fn push(&mut self, name: &str, value: Tensor<T>, inputs: &[Var], op: Op<T>) -> Result<Var> {
        if self.checked && !value.all_finite() {
            return Err(Error::NonFinite(format!("{}", name)));
        }
        let requires_grad = inputs.iter().any(|v| self.nodes[v.0].requires_grad);
        let op = if requires_grad { op } else { Op::Leaf };
        self.nodes.push(Node { value, grad: None, requires_grad, op });
        Ok(Var(self.nodes.len() - 1))
    }

    /// Backpropagates from a one-element `loss`. Gradients add onto whatever
    /// earlier passes left behind until [`Tape::zero_grad`] is called.
    pub fn backward(&mut self, loss: Var) -> Result<()> {
        if self.nodes[loss.0].value.len() != 1 {
            bail!(Contract, "backward needs a scalar loss, got shape {:?}", self.shape(loss));
        }
        if !self.nodes[loss.0].requires_grad {
            return Ok(());
        }
        // Seed onto a fresh buffer so repeated calls accumulate into leaves
        // without doubling the intermediate gradients of a previous pass.
        let mut pending: Vec<Option<Vec<T>>> = (0..=loss.0).map(|_| None).collect();
        pending[loss.0] = Some(vec![T::one()]);
        for idx in (0..=loss.0).rev() {
            let Some(g) = pending[idx].take() else { continue };
            let node = &self.nodes[idx];
            if !node.requires_grad {
                continue;
            }
            if matches!(node.op, Op::Leaf) {
                let node = &mut self.nodes[idx];
                match &mut node.grad {
                    Some(acc) => acc.iter_mut().zip(&g).for_each(|(a, &b)| *a += b),
                    None => node.grad = Some(g),
                }
                continue;
            }
            let contributions = self.backward_node(idx, &g)?;
            for (var, contrib) in contributions {
                if !self.nodes[var.0].requires_grad {
                    continue;
                }
                match &mut pending[var.0] {
                    Some(acc) => acc.iter_mut().zip(&contrib).for_each(|(a, &b)| *a += b),
                    slot @ None => *slot = Some(contrib),
                }
            }
            self.nodes[idx].grad = Some(g);
        }
        Ok(())
    }

    fn wants(&self, var: Var) -> bool {
        self.nodes[var.0].requires_grad
    }

    fn backward_node(&self, idx: usize, g: &[T]) -> Result<Vec<(Var, Vec<T>)>> {
        let node = &self.nodes[idx];
        let out = &node.value;
        Ok(match &node.op {
            Op::Leaf => Vec::new(),
            Op::Conv2d { input, weight, bias, geom } => conv::conv2d_backward(self, *input, *weight, *bias, geom, g),
            Op::ConvTranspose2d { input, weight, bias, geom } => {
                conv::conv_transpose2d_backward(self, *input, *weight, *bias, geom, g)
            }
            Op::BatchNorm { input, gamma, beta, xhat, inv_std, batch_stats } => {
                norm::batch_norm_backward(self, *input, *gamma, *beta, xhat, inv_std, *batch_stats, g)
            }
            Op::Activation { input, kind } => pointwise::activation_backward(self, *input, *kind, out, g),
            Op::Binary { a, b, kind } => pointwise::binary_backward(self, *a, *b, *kind, g),
            Op::Affine { input, scale } => vec![(*input, g.iter().map(|&v| v * *scale).collect())],
            Op::Clamp { input, lo, hi } => pointwise::clamp_backward(self, *input, *lo, *hi, g),
            Op::Ln { input } => {
                let x = self.value(*input).data();
                vec![(*input, g.iter().zip(x).map(|(&gv, &xv)| gv / xv).collect())]
            }
            Op::Pool { input, kind, kernel, stride, argmax } => {
                shape::pool_backward(self, *input, *kind, *kernel, *stride, argmax, out, g)
            }
            Op::UpsampleNearest { input, factor } => shape::upsample_backward(self, *input, *factor, g),
            Op::Concat { inputs } => shape::concat_backward(self, inputs, g),
            Op::SliceChannels { input, start } => shape::slice_backward(self, *input, *start, out, g),
            Op::Reshape { input } => vec![(*input, g.to_vec())],
            Op::Reduce { input, kind, axes, argidx } => reduce::reduce_backward(self, *input, *kind, axes, argidx, out, g),
        })
    }
}

#[cfg(test)]
mod tests;
