use alloc::vec;
use alloc::vec::Vec;

use super::{Op, ReduceOp, Tape, Var};
use crate::error::{bail, Result};
use crate::tensor::dims4;
use crate::{Real, Tensor};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PoolKind {
    Max,
    Avg,
}

impl<T: Real> Tape<T> {
    /// Windowed pooling without padding.
    pub fn pool(&mut self, input: Var, kind: PoolKind, kernel: usize, stride: usize) -> Result<Var> {
        let (n, c, h, w) = dims4(self.shape(input))?;
        if kernel == 0 || stride == 0 || kernel > h || kernel > w {
            bail!(Geometry, "pool kernel {} stride {} on {}x{}", kernel, stride, h, w);
        }
        let (oh, ow) = ((h - kernel) / stride + 1, (w - kernel) / stride + 1);
        let x = self.value(input).data();
        let mut out = vec![T::zero(); n * c * oh * ow];
        let mut argmax = if kind == PoolKind::Max { vec![0usize; out.len()] } else { Vec::new() };
        let inv = T::one() / T::lit((kernel * kernel) as f64);
        for plane in 0..n * c {
            let src = plane * h * w;
            for oy in 0..oh {
                for ox in 0..ow {
                    let o = (plane * oh + oy) * ow + ox;
                    let mut best = T::neg_infinity();
                    let mut best_i = 0;
                    let mut sum = T::zero();
                    for ky in 0..kernel {
                        for kx in 0..kernel {
                            let i = src + (oy * stride + ky) * w + ox * stride + kx;
                            sum += x[i];
                            if x[i] > best {
                                best = x[i];
                                best_i = i;
                            }
                        }
                    }
                    match kind {
                        PoolKind::Max => {
                            out[o] = best;
                            argmax[o] = best_i;
                        }
                        PoolKind::Avg => out[o] = sum * inv,
                    }
                }
            }
        }
        let value = Tensor::new(&[n, c, oh, ow], out)?;
        self.push("pool", value, &[input], Op::Pool { input, kind, kernel, stride, argmax })
    }

    /// Per-channel reduction to N×C×1×1.
    pub fn global_pool(&mut self, input: Var, kind: PoolKind) -> Result<Var> {
        dims4(self.shape(input))?;
        let op = match kind {
            PoolKind::Max => ReduceOp::Max,
            PoolKind::Avg => ReduceOp::Mean,
        };
        self.reduce(input, op, &[2, 3])
    }

    /// Nearest-neighbour upsampling by an integer factor.
    pub fn upsample_nearest(&mut self, input: Var, factor: usize) -> Result<Var> {
        let (n, c, h, w) = dims4(self.shape(input))?;
        if factor == 0 {
            bail!(Contract, "upsample factor must be at least 1");
        }
        let (oh, ow) = (h * factor, w * factor);
        let x = self.value(input).data();
        let mut out = vec![T::zero(); n * c * oh * ow];
        for plane in 0..n * c {
            for oy in 0..oh {
                let src = &x[(plane * h + oy / factor) * w..(plane * h + oy / factor + 1) * w];
                let dst = &mut out[(plane * oh + oy) * ow..(plane * oh + oy + 1) * ow];
                for (ox, d) in dst.iter_mut().enumerate() {
                    *d = src[ox / factor];
                }
            }
        }
        let value = Tensor::new(&[n, c, oh, ow], out)?;
        self.push("upsample_nearest", value, &[input], Op::UpsampleNearest { input, factor })
    }

    /// Concatenation along the channel axis.
    pub fn concat_channels(&mut self, inputs: &[Var]) -> Result<Var> {
        let Some(&first) = inputs.first() else {
            bail!(Dimension, "concat of zero tensors");
        };
        let (n, _, h, w) = dims4(self.shape(first))?;
        let mut total = 0;
        for &v in inputs {
            let (vn, vc, vh, vw) = dims4(self.shape(v))?;
            if (vn, vh, vw) != (n, h, w) {
                bail!(Dimension, "concat spatial mismatch: {:?} vs {:?}", self.shape(v), self.shape(first));
            }
            total += vc;
        }
        let plane = h * w;
        let mut out = Vec::with_capacity(n * total * plane);
        for bi in 0..n {
            for &v in inputs {
                let c = self.shape(v)[1];
                let d = self.value(v).data();
                out.extend_from_slice(&d[bi * c * plane..(bi + 1) * c * plane]);
            }
        }
        let value = Tensor::new(&[n, total, h, w], out)?;
        self.push("concat", value, inputs, Op::Concat { inputs: inputs.to_vec() })
    }

    /// Channels `start..start+len` of an N×C×H×W tensor.
    pub fn slice_channels(&mut self, input: Var, start: usize, len: usize) -> Result<Var> {
        let (n, c, h, w) = dims4(self.shape(input))?;
        if start + len > c || len == 0 {
            bail!(Dimension, "channel slice {}..{} out of {}", start, start + len, c);
        }
        let plane = h * w;
        let x = self.value(input).data();
        let mut out = Vec::with_capacity(n * len * plane);
        for bi in 0..n {
            out.extend_from_slice(&x[(bi * c + start) * plane..(bi * c + start + len) * plane]);
        }
        let value = Tensor::new(&[n, len, h, w], out)?;
        self.push("slice_channels", value, &[input], Op::SliceChannels { input, start })
    }

    pub fn reshape(&mut self, input: Var, shape: &[usize]) -> Result<Var> {
        let value = self.value(input).clone().reshape(shape)?;
        self.push("reshape", value, &[input], Op::Reshape { input })
    }
}

#[allow(clippy::too_many_arguments)]
pub(super) fn pool_backward<T: Real>(
    tape: &Tape<T>,
    input: Var,
    kind: PoolKind,
    kernel: usize,
    stride: usize,
    argmax: &[usize],
    out: &Tensor<T>,
    g: &[T],
) -> Vec<(Var, Vec<T>)> {
    let x = tape.value(input);
    let mut dx = vec![T::zero(); x.len()];
    match kind {
        PoolKind::Max => {
            for (o, &i) in argmax.iter().enumerate() {
                dx[i] += g[o];
            }
        }
        PoolKind::Avg => {
            let (_, _, h, w) = x.dims4().expect("validated in forward");
            let (_, _, oh, ow) = out.dims4().expect("validated in forward");
            let inv = T::one() / T::lit((kernel * kernel) as f64);
            for plane in 0..g.len() / (oh * ow) {
                for oy in 0..oh {
                    for ox in 0..ow {
                        let gv = g[(plane * oh + oy) * ow + ox] * inv;
                        for ky in 0..kernel {
                            let row = plane * h * w + (oy * stride + ky) * w + ox * stride;
                            dx[row..row + kernel].iter_mut().for_each(|d| *d += gv);
                        }
                    }
                }
            }
        }
    }
    vec![(input, dx)]
}

pub(super) fn upsample_backward<T: Real>(tape: &Tape<T>, input: Var, factor: usize, g: &[T]) -> Vec<(Var, Vec<T>)> {
    let (n, c, h, w) = tape.value(input).dims4().expect("validated in forward");
    let (oh, ow) = (h * factor, w * factor);
    let mut dx = vec![T::zero(); n * c * h * w];
    for plane in 0..n * c {
        for oy in 0..oh {
            let src = &g[(plane * oh + oy) * ow..(plane * oh + oy + 1) * ow];
            let dst = &mut dx[(plane * h + oy / factor) * w..(plane * h + oy / factor + 1) * w];
            for (ox, &v) in src.iter().enumerate() {
                dst[ox / factor] += v;
            }
        }
    }
    vec![(input, dx)]
}

pub(super) fn concat_backward<T: Real>(tape: &Tape<T>, inputs: &[Var], g: &[T]) -> Vec<(Var, Vec<T>)> {
    let (n, _, h, w) = tape.value(inputs[0]).dims4().expect("validated in forward");
    let plane = h * w;
    let total: usize = inputs.iter().map(|&v| tape.shape(v)[1]).sum();
    let mut res = Vec::with_capacity(inputs.len());
    let mut offset = 0;
    for &v in inputs {
        let c = tape.shape(v)[1];
        if tape.wants(v) {
            let mut dx = Vec::with_capacity(n * c * plane);
            for bi in 0..n {
                let start = (bi * total + offset) * plane;
                dx.extend_from_slice(&g[start..start + c * plane]);
            }
            res.push((v, dx));
        }
        offset += c;
    }
    res
}

pub(super) fn slice_backward<T: Real>(tape: &Tape<T>, input: Var, start: usize, out: &Tensor<T>, g: &[T]) -> Vec<(Var, Vec<T>)> {
    let (n, c, h, w) = tape.value(input).dims4().expect("validated in forward");
    let len = out.shape()[1];
    let plane = h * w;
    let mut dx = vec![T::zero(); n * c * plane];
    for bi in 0..n {
        let dst = (bi * c + start) * plane;
        dx[dst..dst + len * plane].copy_from_slice(&g[bi * len * plane..(bi + 1) * len * plane]);
    }
    vec![(input, dx)]
}
