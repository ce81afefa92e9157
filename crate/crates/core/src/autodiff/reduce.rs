use alloc::vec;
use alloc::vec::Vec;

use super::{Op, Tape, Var};
use crate::error::{bail, Result};
use crate::{Real, Tensor};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReduceOp {
    Sum,
    Mean,
    Max,
    Min,
}

/// Output flat index for every input flat index when `axes` collapse to 1.
fn output_index_map(shape: &[usize], axes: &[bool]) -> (Vec<usize>, Vec<usize>) {
    let out_shape: Vec<usize> = shape.iter().zip(axes).map(|(&s, &r)| if r { 1 } else { s }).collect();
    let rank = shape.len();
    let mut ostride = vec![0; rank];
    let mut acc = 1;
    for d in (0..rank).rev() {
        ostride[d] = if axes[d] { 0 } else { acc };
        acc *= out_shape[d];
    }
    let numel: usize = shape.iter().product();
    let mut map = Vec::with_capacity(numel);
    let mut idx = vec![0usize; rank];
    for _ in 0..numel {
        map.push(idx.iter().zip(&ostride).map(|(i, s)| i * s).sum());
        for d in (0..rank).rev() {
            idx[d] += 1;
            if idx[d] < shape[d] {
                break;
            }
            idx[d] = 0;
        }
    }
    (out_shape, map)
}

impl<T: Real> Tape<T> {
    /// Reduction over `axes`, keeping them as size-1 dimensions. An empty
    /// axis list returns `input` unchanged.
    pub fn reduce(&mut self, input: Var, kind: ReduceOp, axes: &[usize]) -> Result<Var> {
        if axes.is_empty() {
            return Ok(input);
        }
        let shape = self.shape(input).to_vec();
        let mut mask = vec![false; shape.len()];
        for &a in axes {
            if a >= shape.len() {
                bail!(Dimension, "reduce axis {} out of range for rank {}", a, shape.len());
            }
            mask[a] = true;
        }
        let (out_shape, map) = output_index_map(&shape, &mask);
        let x = self.value(input).data();
        let out_len: usize = out_shape.iter().product();
        let group = x.len() / out_len.max(1);
        let mut out = vec![
            match kind {
                ReduceOp::Sum | ReduceOp::Mean => T::zero(),
                ReduceOp::Max => T::neg_infinity(),
                ReduceOp::Min => T::infinity(),
            };
            out_len
        ];
        let mut argidx = if matches!(kind, ReduceOp::Max | ReduceOp::Min) { vec![usize::MAX; out_len] } else { Vec::new() };
        for (i, (&v, &o)) in x.iter().zip(&map).enumerate() {
            match kind {
                ReduceOp::Sum | ReduceOp::Mean => out[o] += v,
                ReduceOp::Max => {
                    if v > out[o] || argidx[o] == usize::MAX {
                        out[o] = v;
                        argidx[o] = i;
                    }
                }
                ReduceOp::Min => {
                    if v < out[o] || argidx[o] == usize::MAX {
                        out[o] = v;
                        argidx[o] = i;
                    }
                }
            }
        }
        if kind == ReduceOp::Mean {
            let inv = T::one() / T::lit(group as f64);
            out.iter_mut().for_each(|v| *v *= inv);
        }
        let value = Tensor::new(&out_shape, out)?;
        self.push("reduce", value, &[input], Op::Reduce { input, kind, axes: mask, argidx })
    }

    fn reduce_all(&mut self, input: Var, kind: ReduceOp) -> Result<Var> {
        let rank = self.shape(input).len();
        let axes: Vec<usize> = (0..rank).collect();
        let r = if rank == 0 { input } else { self.reduce(input, kind, &axes)? };
        self.reshape(r, &[])
    }

    /// Sum of all elements as a rank-0 tensor.
    pub fn sum_all(&mut self, input: Var) -> Result<Var> {
        self.reduce_all(input, ReduceOp::Sum)
    }

    /// Mean of all elements as a rank-0 tensor.
    pub fn mean_all(&mut self, input: Var) -> Result<Var> {
        self.reduce_all(input, ReduceOp::Mean)
    }

    /// Mean squared difference over all elements.
    pub fn mse(&mut self, a: Var, b: Var) -> Result<Var> {
        if self.shape(a) != self.shape(b) {
            bail!(Dimension, "mse operands {:?} and {:?} differ", self.shape(a), self.shape(b));
        }
        let d = self.sub(a, b)?;
        let sq = self.mul(d, d)?;
        self.mean_all(sq)
    }
}

pub(super) fn reduce_backward<T: Real>(
    tape: &Tape<T>,
    input: Var,
    kind: ReduceOp,
    axes: &[bool],
    argidx: &[usize],
    out: &Tensor<T>,
    g: &[T],
) -> Vec<(Var, Vec<T>)> {
    let shape = tape.shape(input);
    let n = tape.value(input).len();
    let mut dx = vec![T::zero(); n];
    match kind {
        ReduceOp::Sum | ReduceOp::Mean => {
            let (_, map) = output_index_map(shape, axes);
            let scale = if kind == ReduceOp::Mean { T::lit(out.len() as f64 / n as f64) } else { T::one() };
            for (d, &o) in dx.iter_mut().zip(&map) {
                *d = g[o] * scale;
            }
        }
        ReduceOp::Max | ReduceOp::Min => {
            for (o, &i) in argidx.iter().enumerate() {
                dx[i] += g[o];
            }
        }
    }
    vec![(input, dx)]
}
