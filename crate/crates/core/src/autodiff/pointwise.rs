use alloc::vec;
use alloc::vec::Vec;

use super::{Op, Tape, Var};
use crate::error::{bail, Result};
use crate::{Real, Tensor};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Activation {
    Relu,
    LeakyRelu(f64),
    Sigmoid,
    Tanh,
}

impl Activation {
    pub fn apply<T: Real>(self, x: T) -> T {
        match self {
            Activation::Relu => x.max(T::zero()),
            Activation::LeakyRelu(slope) => {
                if x > T::zero() {
                    x
                } else {
                    x * T::lit(slope)
                }
            }
            Activation::Sigmoid => T::one() / (T::one() + (-x).exp()),
            Activation::Tanh => x.tanh(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Div,
}

/// Same-rank (after left-padding with ones) broadcast shape.
fn broadcast_shape(a: &[usize], b: &[usize]) -> Result<Vec<usize>> {
    let rank = a.len().max(b.len());
    let pad = |s: &[usize], i: usize| if i + s.len() < rank { 1 } else { s[i + s.len() - rank] };
    (0..rank)
        .map(|i| match (pad(a, i), pad(b, i)) {
            (x, y) if x == y => Ok(x),
            (1, y) => Ok(y),
            (x, 1) => Ok(x),
            _ => bail!(Dimension, "shapes {:?} and {:?} do not broadcast", a, b),
        })
        .collect()
}

/// Row-major strides of `shape` viewed in `out`'s rank, zero on broadcast axes.
fn broadcast_strides(shape: &[usize], out: &[usize]) -> Vec<usize> {
    let rank = out.len();
    let mut strides = vec![0; rank];
    let mut acc = 1;
    for i in (0..shape.len()).rev() {
        let oi = i + rank - shape.len();
        strides[oi] = if shape[i] == 1 && out[oi] != 1 { 0 } else { acc };
        acc *= shape[i];
    }
    strides
}

fn for_each_broadcast(out: &[usize], sa: &[usize], sb: &[usize], mut f: impl FnMut(usize, usize, usize)) {
    let numel: usize = out.iter().product();
    if numel == 0 {
        return;
    }
    let rank = out.len();
    if rank == 0 {
        f(0, 0, 0);
        return;
    }
    let inner = out[rank - 1];
    let (ia_step, ib_step) = (sa[rank - 1], sb[rank - 1]);
    let mut idx = vec![0usize; rank];
    let mut o = 0;
    while o < numel {
        let base_a: usize = (0..rank - 1).map(|d| idx[d] * sa[d]).sum();
        let base_b: usize = (0..rank - 1).map(|d| idx[d] * sb[d]).sum();
        for j in 0..inner {
            f(o + j, base_a + j * ia_step, base_b + j * ib_step);
        }
        o += inner;
        for d in (0..rank - 1).rev() {
            idx[d] += 1;
            if idx[d] < out[d] {
                break;
            }
            idx[d] = 0;
        }
    }
}

impl<T: Real> Tape<T> {
    pub fn activation(&mut self, input: Var, kind: Activation) -> Result<Var> {
        let value = self.value(input).map(|v| kind.apply(v));
        self.push("activation", value, &[input], Op::Activation { input, kind })
    }

    pub fn relu(&mut self, input: Var) -> Result<Var> {
        self.activation(input, Activation::Relu)
    }

    pub fn leaky_relu(&mut self, input: Var, slope: f64) -> Result<Var> {
        self.activation(input, Activation::LeakyRelu(slope))
    }

    pub fn sigmoid(&mut self, input: Var) -> Result<Var> {
        self.activation(input, Activation::Sigmoid)
    }

    pub fn tanh(&mut self, input: Var) -> Result<Var> {
        self.activation(input, Activation::Tanh)
    }

    /// Elementwise binary op with broadcasting of size-1 axes.
    pub fn binary(&mut self, a: Var, b: Var, kind: BinaryOp) -> Result<Var> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        let out_shape = broadcast_shape(sa, sb)?;
        let (va, vb) = (self.value(a).data(), self.value(b).data());
        let mut out = vec![T::zero(); out_shape.iter().product()];
        let f = |x: T, y: T| match kind {
            BinaryOp::Add => x + y,
            BinaryOp::Sub => x - y,
            BinaryOp::Mul => x * y,
            BinaryOp::Div => x / y,
        };
        if sa == sb {
            out.iter_mut().zip(va.iter().zip(vb)).for_each(|(o, (&x, &y))| *o = f(x, y));
        } else {
            let (ta, tb) = (broadcast_strides(sa, &out_shape), broadcast_strides(sb, &out_shape));
            for_each_broadcast(&out_shape, &ta, &tb, |o, i, j| out[o] = f(va[i], vb[j]));
        }
        let value = Tensor::new(&out_shape, out)?;
        self.push("elementwise", value, &[a, b], Op::Binary { a, b, kind })
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(a, b, BinaryOp::Add)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(a, b, BinaryOp::Sub)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(a, b, BinaryOp::Mul)
    }

    pub fn div(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(a, b, BinaryOp::Div)
    }

    /// `scale * x + shift`.
    pub fn affine(&mut self, input: Var, scale: T, shift: T) -> Result<Var> {
        let value = self.value(input).map(|v| scale * v + shift);
        self.push("affine", value, &[input], Op::Affine { input, scale })
    }

    pub fn scale(&mut self, input: Var, scale: T) -> Result<Var> {
        self.affine(input, scale, T::zero())
    }

    pub fn clamp(&mut self, input: Var, lo: T, hi: T) -> Result<Var> {
        if lo > hi {
            bail!(Contract, "clamp bounds reversed");
        }
        let value = self.value(input).map(|v| v.max(lo).min(hi));
        self.push("clamp", value, &[input], Op::Clamp { input, lo, hi })
    }

    pub fn ln(&mut self, input: Var) -> Result<Var> {
        let value = self.value(input).map(|v| v.ln());
        self.push("ln", value, &[input], Op::Ln { input })
    }
}

pub(super) fn activation_backward<T: Real>(
    tape: &Tape<T>,
    input: Var,
    kind: Activation,
    out: &Tensor<T>,
    g: &[T],
) -> Vec<(Var, Vec<T>)> {
    let x = tape.value(input).data();
    let y = out.data();
    let dx = match kind {
        Activation::Relu => g.iter().zip(x).map(|(&gv, &xv)| if xv > T::zero() { gv } else { T::zero() }).collect(),
        Activation::LeakyRelu(slope) => {
            let s = T::lit(slope);
            g.iter().zip(x).map(|(&gv, &xv)| if xv > T::zero() { gv } else { gv * s }).collect()
        }
        Activation::Sigmoid => g.iter().zip(y).map(|(&gv, &yv)| gv * yv * (T::one() - yv)).collect(),
        Activation::Tanh => g.iter().zip(y).map(|(&gv, &yv)| gv * (T::one() - yv * yv)).collect(),
    };
    vec![(input, dx)]
}

pub(super) fn clamp_backward<T: Real>(tape: &Tape<T>, input: Var, lo: T, hi: T, g: &[T]) -> Vec<(Var, Vec<T>)> {
    let x = tape.value(input).data();
    let dx = g.iter().zip(x).map(|(&gv, &xv)| if xv >= lo && xv <= hi { gv } else { T::zero() }).collect();
    vec![(input, dx)]
}

pub(super) fn binary_backward<T: Real>(tape: &Tape<T>, a: Var, b: Var, kind: BinaryOp, g: &[T]) -> Vec<(Var, Vec<T>)> {
    let (sa, sb) = (tape.shape(a), tape.shape(b));
    let (va, vb) = (tape.value(a).data(), tape.value(b).data());
    let (want_a, want_b) = (tape.wants(a), tape.wants(b));
    let mut da = if want_a { vec![T::zero(); va.len()] } else { Vec::new() };
    let mut db = if want_b { vec![T::zero(); vb.len()] } else { Vec::new() };
    let mut step = |o: usize, i: usize, j: usize| {
        let gv = g[o];
        let (x, y) = (va[i], vb[j]);
        let (ga, gb) = match kind {
            BinaryOp::Add => (gv, gv),
            BinaryOp::Sub => (gv, -gv),
            BinaryOp::Mul => (gv * y, gv * x),
            BinaryOp::Div => (gv / y, -gv * x / (y * y)),
        };
        if want_a {
            da[i] += ga;
        }
        if want_b {
            db[j] += gb;
        }
    };
    if sa == sb {
        for o in 0..g.len() {
            step(o, o, o);
        }
    } else {
        let out_shape = broadcast_shape(sa, sb).expect("validated in forward");
        let (ta, tb) = (broadcast_strides(sa, &out_shape), broadcast_strides(sb, &out_shape));
        for_each_broadcast(&out_shape, &ta, &tb, step);
    }
    let mut res = Vec::with_capacity(2);
    if want_a {
        res.push((a, da));
    }
    if want_b {
        res.push((b, db));
    }
    res
}
