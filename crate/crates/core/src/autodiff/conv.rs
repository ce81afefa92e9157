use alloc::vec;
use alloc::vec::Vec;

use super::kernels::{col2im_add, im2col, Window};
use super::{Op, Tape, Var};
use crate::error::{bail, Result};
use crate::tensor::dims4;
use crate::{Real, Tensor};

/// Zero padding added around the spatial extent before a convolution.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub struct Padding {
    pub top: usize,
    pub left: usize,
    pub bottom: usize,
    pub right: usize,
}

impl Padding {
    pub const fn uniform(p: usize) -> Self {
        Self { top: p, left: p, bottom: p, right: p }
    }

    /// Size-preserving padding for a stride-1 kernel of size `k`; even
    /// kernels put the extra row/column at the bottom/right.
    pub const fn same(k: usize) -> Self {
        let total = k - 1;
        Self { top: total / 2, left: total / 2, bottom: total - total / 2, right: total - total / 2 }
    }
}

impl From<usize> for Padding {
    fn from(p: usize) -> Self {
        Padding::uniform(p)
    }
}

#[derive(Clone, Copy, Debug)]
pub(crate) struct ConvGeom {
    n: usize,
    c_in: usize,
    c_out: usize,
    /// Sweep over the larger image: the input for a convolution, the output
    /// for a transposed convolution.
    win: Window,
}

fn out_extent(size: usize, before: usize, after: usize, k: usize, stride: usize) -> Option<usize> {
    let padded = size + before + after;
    if padded < k || stride == 0 {
        return None;
    }
    Some((padded - k) / stride + 1)
}

impl<T: Real> Tape<T> {
    /// 2-D convolution; `weight` is O×I×K×K, `bias` has O entries.
    pub fn conv2d(&mut self, input: Var, weight: Var, bias: Var, stride: usize, padding: impl Into<Padding>) -> Result<Var> {
        let pad = padding.into();
        let (n, c, h, w) = dims4(self.shape(input))?;
        let (o, i, kh, kw) = dims4(self.shape(weight))?;
        if i != c {
            bail!(Dimension, "conv2d input has {} channels, weight expects {}", c, i);
        }
        if kh != kw {
            bail!(Dimension, "conv2d kernel must be square, got {}x{}", kh, kw);
        }
        if self.shape(bias) != [o] {
            bail!(Dimension, "conv2d bias shape {:?}, expected [{}]", self.shape(bias), o);
        }
        let (Some(out_h), Some(out_w)) = (
            out_extent(h, pad.top, pad.bottom, kh, stride),
            out_extent(w, pad.left, pad.right, kw, stride),
        ) else {
            bail!(Geometry, "conv2d kernel {} stride {} does not fit {}x{} with {:?}", kh, stride, h, w, pad);
        };
        let win = Window { channels: c, h, w, k: kh, stride, pad_top: pad.top, pad_left: pad.left, out_h, out_w };
        let geom = ConvGeom { n, c_in: c, c_out: o, win };

        let x = self.value(input).data();
        let wt = self.value(weight).data();
        let b = self.value(bias).data();
        let (rows, p) = (win.col_rows(), win.col_cols());
        let mut cols = vec![T::zero(); rows * p];
        let mut out = vec![T::zero(); n * o * p];
        for bi in 0..n {
            im2col(&x[bi * c * h * w..(bi + 1) * c * h * w], &win, &mut cols);
            let dst = &mut out[bi * o * p..(bi + 1) * o * p];
            T::matmul(o, rows, p, wt, false, &cols, false, dst, T::zero());
            for (oc, chunk) in dst.chunks_mut(p).enumerate() {
                chunk.iter_mut().for_each(|v| *v += b[oc]);
            }
        }
        let value = Tensor::new(&[n, o, out_h, out_w], out)?;
        self.push("conv2d", value, &[input, weight, bias], Op::Conv2d { input, weight, bias, geom })
    }

    /// Transposed convolution (learned upsampling); `weight` is I×O×K×K.
    /// Output extent is `(H-1)·stride - 2·padding + K + output_padding`.
    pub fn conv_transpose2d(
        &mut self,
        input: Var,
        weight: Var,
        bias: Var,
        stride: usize,
        padding: usize,
        output_padding: usize,
    ) -> Result<Var> {
        let (n, c, h, w) = dims4(self.shape(input))?;
        let (i, o, kh, kw) = dims4(self.shape(weight))?;
        if i != c {
            bail!(Dimension, "conv_transpose2d input has {} channels, weight expects {}", c, i);
        }
        if kh != kw {
            bail!(Dimension, "conv_transpose2d kernel must be square");
        }
        if self.shape(bias) != [o] {
            bail!(Dimension, "conv_transpose2d bias shape {:?}, expected [{}]", self.shape(bias), o);
        }
        if stride == 0 || h == 0 || w == 0 {
            bail!(Geometry, "conv_transpose2d with stride {} on {}x{}", stride, h, w);
        }
        let grow = |s: usize| ((s - 1) * stride + kh + output_padding) as isize - 2 * padding as isize;
        let (big_h, big_w) = (grow(h), grow(w));
        if big_h < 1 || big_w < 1 {
            bail!(Geometry, "conv_transpose2d output would be empty");
        }
        let win = Window {
            channels: o,
            h: big_h as usize,
            w: big_w as usize,
            k: kh,
            stride,
            pad_top: padding,
            pad_left: padding,
            out_h: h,
            out_w: w,
        };
        let geom = ConvGeom { n, c_in: c, c_out: o, win };

        let x = self.value(input).data();
        let wt = self.value(weight).data();
        let b = self.value(bias).data();
        let (rows, p) = (win.col_rows(), win.col_cols());
        let big = win.h * win.w;
        let mut cols = vec![T::zero(); rows * p];
        let mut out = vec![T::zero(); n * o * big];
        for bi in 0..n {
            T::matmul(rows, c, p, wt, true, &x[bi * c * p..(bi + 1) * c * p], false, &mut cols, T::zero());
            let dst = &mut out[bi * o * big..(bi + 1) * o * big];
            col2im_add(&cols, &win, dst);
            for (oc, chunk) in dst.chunks_mut(big).enumerate() {
                chunk.iter_mut().for_each(|v| *v += b[oc]);
            }
        }
        let value = Tensor::new(&[n, o, win.h, win.w], out)?;
        self.push("conv_transpose2d", value, &[input, weight, bias], Op::ConvTranspose2d { input, weight, bias, geom })
    }
}

fn bias_grad<T: Real>(g: &[T], n: usize, c: usize, plane: usize) -> Vec<T> {
    let mut db = vec![T::zero(); c];
    for bi in 0..n {
        for (ch, d) in db.iter_mut().enumerate() {
            let off = (bi * c + ch) * plane;
            *d += g[off..off + plane].iter().copied().sum::<T>();
        }
    }
    db
}

pub(super) fn conv2d_backward<T: Real>(
    tape: &Tape<T>,
    input: Var,
    weight: Var,
    bias: Var,
    geom: &ConvGeom,
    g: &[T],
) -> Vec<(Var, Vec<T>)> {
    let ConvGeom { n, c_in, c_out, win } = *geom;
    let (rows, p) = (win.col_rows(), win.col_cols());
    let img = c_in * win.h * win.w;
    let x = tape.value(input).data();
    let wt = tape.value(weight).data();
    let want_x = tape.wants(input);
    let want_w = tape.wants(weight);

    let mut res = Vec::with_capacity(3);
    let mut cols = vec![T::zero(); rows * p];
    let mut dw = if want_w { vec![T::zero(); wt.len()] } else { Vec::new() };
    let mut dx = if want_x { vec![T::zero(); x.len()] } else { Vec::new() };
    for bi in 0..n {
        let gn = &g[bi * c_out * p..(bi + 1) * c_out * p];
        if want_w {
            im2col(&x[bi * img..(bi + 1) * img], &win, &mut cols);
            T::matmul(c_out, p, rows, gn, false, &cols, true, &mut dw, T::one());
        }
        if want_x {
            T::matmul(rows, c_out, p, wt, true, gn, false, &mut cols, T::zero());
            col2im_add(&cols, &win, &mut dx[bi * img..(bi + 1) * img]);
        }
    }
    if want_x {
        res.push((input, dx));
    }
    if want_w {
        res.push((weight, dw));
    }
    if tape.wants(bias) {
        res.push((bias, bias_grad(g, n, c_out, p)));
    }
    res
}

pub(super) fn conv_transpose2d_backward<T: Real>(
    tape: &Tape<T>,
    input: Var,
    weight: Var,
    bias: Var,
    geom: &ConvGeom,
    g: &[T],
) -> Vec<(Var, Vec<T>)> {
    let ConvGeom { n, c_in, c_out, win } = *geom;
    let (rows, p) = (win.col_rows(), win.col_cols());
    let big = win.h * win.w;
    let x = tape.value(input).data();
    let wt = tape.value(weight).data();
    let want_x = tape.wants(input);
    let want_w = tape.wants(weight);

    let mut res = Vec::with_capacity(3);
    let mut dcols = vec![T::zero(); rows * p];
    let mut dw = if want_w { vec![T::zero(); wt.len()] } else { Vec::new() };
    let mut dx = if want_x { vec![T::zero(); x.len()] } else { Vec::new() };
    if want_x || want_w {
        for bi in 0..n {
            im2col(&g[bi * c_out * big..(bi + 1) * c_out * big], &win, &mut dcols);
            if want_x {
                T::matmul(c_in, rows, p, wt, false, &dcols, false, &mut dx[bi * c_in * p..(bi + 1) * c_in * p], T::zero());
            }
            if want_w {
                T::matmul(c_in, p, rows, &x[bi * c_in * p..(bi + 1) * c_in * p], false, &dcols, true, &mut dw, T::one());
            }
        }
    }
    if want_x {
        res.push((input, dx));
    }
    if want_w {
        res.push((weight, dw));
    }
    if tape.wants(bias) {
        res.push((bias, bias_grad(g, n, c_out, big)));
    }
    res
}
