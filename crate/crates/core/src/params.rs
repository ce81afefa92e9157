//! Named, ordered parameter collections: the unit of optimization and
//! checkpointing.

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::ops::Index;

use crate::autodiff::{RunningStats, Tape, Var};
use crate::error::{bail, Result};
use crate::{Error, Real, Tensor};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct ParamId(usize);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct BufferId(usize);

#[derive(Clone, Debug, PartialEq)]
pub struct ParamEntry<T> {
    pub name: String,
    pub value: Tensor<T>,
    pub grad: Tensor<T>,
}

/// Trainable tensors of one network plus its non-trainable buffers
/// (batch-norm running statistics).
#[derive(Clone, Debug, PartialEq)]
pub struct NetworkParams<T> {
    tag: String,
    width_scale: usize,
    entries: Vec<ParamEntry<T>>,
    buffers: Vec<(String, Tensor<T>)>,
}

/// Tape handles for every parameter of one network, valid for one tape.
#[derive(Clone, Debug)]
pub struct Binding {
    vars: Vec<Var>,
    trainable: bool,
}

impl Binding {
    pub fn is_trainable(&self) -> bool {
        self.trainable
    }

    /// Handles in parameter registration order.
    pub fn vars(&self) -> &[Var] {
        &self.vars
    }
}

impl Index<ParamId> for Binding {
    type Output = Var;

    fn index(&self, id: ParamId) -> &Var {
        &self.vars[id.0]
    }
}

impl<T: Real> NetworkParams<T> {
    pub fn new(tag: &str, width_scale: usize) -> Self {
        Self { tag: tag.to_string(), width_scale, entries: Vec::new(), buffers: Vec::new() }
    }

    pub fn tag(&self) -> &str {
        &self.tag
    }

    pub fn width_scale(&self) -> usize {
        self.width_scale
    }

    /// Registers a parameter. Names must be unique within the network.
    pub fn add(&mut self, name: &str, value: Tensor<T>) -> ParamId {
        assert!(self.entries.iter().all(|e| e.name != name), "duplicate parameter name {name}");
        let grad = Tensor::zeros(value.shape());
        self.entries.push(ParamEntry { name: name.to_string(), value, grad });
        ParamId(self.entries.len() - 1)
    }

    pub fn add_buffer(&mut self, name: &str, value: Tensor<T>) -> BufferId {
        assert!(self.buffers.iter().all(|(n, _)| n != name), "duplicate buffer name {name}");
        self.buffers.push((name.to_string(), value));
        BufferId(self.buffers.len() - 1)
    }

    pub fn entries(&self) -> &[ParamEntry<T>] {
        &self.entries
    }

    pub fn entries_mut(&mut self) -> &mut [ParamEntry<T>] {
        &mut self.entries
    }

    pub fn buffers(&self) -> &[(String, Tensor<T>)] {
        &self.buffers
    }

    pub fn value(&self, id: ParamId) -> &Tensor<T> {
        &self.entries[id.0].value
    }

    pub fn value_mut(&mut self, id: ParamId) -> &mut Tensor<T> {
        &mut self.entries[id.0].value
    }

    pub fn buffer(&self, id: BufferId) -> &Tensor<T> {
        &self.buffers[id.0].1
    }

    pub fn find(&self, name: &str) -> Option<ParamId> {
        self.entries.iter().position(|e| e.name == name).map(ParamId)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Total number of trainable scalars.
    pub fn num_scalars(&self) -> usize {
        self.entries.iter().map(|e| e.value.len()).sum()
    }

    /// Running mean/variance pair registered as two consecutive buffers.
    pub fn running_stats(&mut self, mean: BufferId, var: BufferId, momentum: T) -> RunningStats<'_, T> {
        assert_eq!(mean.0 + 1, var.0, "running statistics must be registered together");
        let (head, tail) = self.buffers.split_at_mut(var.0);
        RunningStats { mean: head[mean.0].1.data_mut(), var: tail[0].1.data_mut(), momentum }
    }

    /// Records every parameter on `tape`; frozen bindings get no gradients.
    pub fn bind(&self, tape: &mut Tape<T>, trainable: bool) -> Binding {
        let vars = self.entries.iter().map(|e| tape.leaf(e.value.clone(), trainable)).collect();
        Binding { vars, trainable }
    }

    /// Adds the gradients a backward pass left on `binding` into `grad`.
    pub fn accumulate_grads(&mut self, tape: &Tape<T>, binding: &Binding) {
        for (entry, &var) in self.entries.iter_mut().zip(&binding.vars) {
            if let Some(g) = tape.grad_data(var) {
                entry.grad.data_mut().iter_mut().zip(g).for_each(|(a, &b)| *a += b);
            }
        }
    }

    pub fn zero_grad(&mut self) {
        for e in &mut self.entries {
            e.grad.data_mut().fill(T::zero());
        }
    }

    /// Overwrites a parameter or buffer by name, checking its shape.
    pub fn assign(&mut self, name: &str, value: Tensor<T>) -> Result<()> {
        let slot = if let Some(e) = self.entries.iter_mut().find(|e| e.name == name) {
            &mut e.value
        } else if let Some((_, b)) = self.buffers.iter_mut().find(|(n, _)| n == name) {
            b
        } else {
            return Err(Error::Params { name: name.to_string(), reason: "unknown tensor".to_string() });
        };
        if slot.shape() != value.shape() {
            return Err(Error::Params {
                name: name.to_string(),
                reason: alloc::format!("shape {:?} does not match expected {:?}", value.shape(), slot.shape()),
            });
        }
        *slot = value;
        Ok(())
    }

    /// Names of parameters followed by buffers, in registration order.
    pub fn tensor_names(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|e| e.name.as_str()).chain(self.buffers.iter().map(|(n, _)| n.as_str()))
    }

    pub fn check_finite(&self) -> Result<()> {
        for e in &self.entries {
            if !e.value.all_finite() {
                bail!(NonFinite, "parameter {}", e.name);
            }
        }
        Ok(())
    }
}
