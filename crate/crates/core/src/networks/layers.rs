use alloc::format;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::autodiff::{NormMode, Padding, Tape, Var};
use crate::error::Result;
use crate::params::{Binding, BufferId, NetworkParams, ParamId};
use crate::{Real, Tensor};

pub(crate) const BN_EPS: f64 = 1e-5;
pub(crate) const BN_MOMENTUM: f64 = 0.1;
pub(crate) const INIT_STD: f64 = 0.02;
pub(crate) const LEAKY_SLOPE: f64 = 0.2;

/// Everything a layer needs during one forward pass.
pub(crate) struct Ctx<'a, T: Real> {
    pub tape: &'a mut Tape<T>,
    pub bind: &'a Binding,
    pub params: &'a mut NetworkParams<T>,
    pub mode: NormMode,
}

pub(crate) fn normal_tensor<T: Real, R: Rng + ?Sized>(rng: &mut R, shape: &[usize], mean: f64, std: f64) -> Tensor<T> {
    let dist = Normal::new(mean, std).expect("valid normal");
    Tensor::from_fn(shape, |_| T::lit(dist.sample(rng)))
}

#[derive(Clone, Debug)]
pub(crate) struct Conv {
    w: ParamId,
    b: ParamId,
    stride: usize,
    pad: Padding,
}

impl Conv {
    #[allow(clippy::too_many_arguments)]
    pub fn new<T: Real, R: Rng + ?Sized>(
        params: &mut NetworkParams<T>,
        rng: &mut R,
        name: &str,
        cin: usize,
        cout: usize,
        k: usize,
        stride: usize,
        pad: impl Into<Padding>,
    ) -> Self {
        Self::with_std(params, rng, name, cin, cout, k, stride, pad, INIT_STD)
    }

    #[allow(clippy::too_many_arguments)]
    pub fn with_std<T: Real, R: Rng + ?Sized>(
        params: &mut NetworkParams<T>,
        rng: &mut R,
        name: &str,
        cin: usize,
        cout: usize,
        k: usize,
        stride: usize,
        pad: impl Into<Padding>,
        std: f64,
    ) -> Self {
        let w = params.add(&format!("{name}.w"), normal_tensor(rng, &[cout, cin, k, k], 0.0, std));
        let b = params.add(&format!("{name}.b"), Tensor::zeros(&[cout]));
        Self { w, b, stride, pad: pad.into() }
    }

    /// 'Same' padding for an odd kernel at stride 1.
    pub fn same<T: Real, R: Rng + ?Sized>(
        params: &mut NetworkParams<T>,
        rng: &mut R,
        name: &str,
        cin: usize,
        cout: usize,
        k: usize,
    ) -> Self {
        Self::new(params, rng, name, cin, cout, k, 1, k / 2)
    }

    pub fn forward<T: Real>(&self, cx: &mut Ctx<'_, T>, x: Var) -> Result<Var> {
        cx.tape.conv2d(x, cx.bind[self.w], cx.bind[self.b], self.stride, self.pad)
    }
}

/// Stride-2 transposed convolution that exactly doubles H and W.
#[derive(Clone, Debug)]
pub(crate) struct UpConv {
    w: ParamId,
    b: ParamId,
    pad: usize,
    out_pad: usize,
}

impl UpConv {
    pub fn new<T: Real, R: Rng + ?Sized>(
        params: &mut NetworkParams<T>,
        rng: &mut R,
        name: &str,
        cin: usize,
        cout: usize,
        k: usize,
    ) -> Self {
        // (H-1)·2 - 2p + k + op = 2H  ⇒  k=3: p=1, op=1;  k=4: p=1, op=0.
        let (pad, out_pad) = match k {
            3 => (1, 1),
            4 => (1, 0),
            _ => panic!("unsupported upsampling kernel {k}"),
        };
        let w = params.add(&format!("{name}.w"), normal_tensor(rng, &[cin, cout, k, k], 0.0, INIT_STD));
        let b = params.add(&format!("{name}.b"), Tensor::zeros(&[cout]));
        Self { w, b, pad, out_pad }
    }

    pub fn forward<T: Real>(&self, cx: &mut Ctx<'_, T>, x: Var) -> Result<Var> {
        cx.tape.conv_transpose2d(x, cx.bind[self.w], cx.bind[self.b], 2, self.pad, self.out_pad)
    }
}

#[derive(Clone, Debug)]
pub(crate) struct BatchNorm {
    gamma: ParamId,
    beta: ParamId,
    mean: BufferId,
    var: BufferId,
}

impl BatchNorm {
    pub fn new<T: Real, R: Rng + ?Sized>(params: &mut NetworkParams<T>, rng: &mut R, name: &str, c: usize) -> Self {
        let gamma = params.add(&format!("{name}.gamma"), normal_tensor(rng, &[c], 1.0, INIT_STD));
        let beta = params.add(&format!("{name}.beta"), Tensor::zeros(&[c]));
        let mean = params.add_buffer(&format!("{name}.running_mean"), Tensor::zeros(&[c]));
        let var = params.add_buffer(&format!("{name}.running_var"), Tensor::full(&[c], T::one()));
        Self { gamma, beta, mean, var }
    }

    pub fn forward<T: Real>(&self, cx: &mut Ctx<'_, T>, x: Var) -> Result<Var> {
        let stats = cx.params.running_stats(self.mean, self.var, T::lit(BN_MOMENTUM));
        cx.tape.batch_norm(x, cx.bind[self.gamma], cx.bind[self.beta], T::lit(BN_EPS), cx.mode, stats)
    }
}

/// Convolution, batch normalization, ReLU.
#[derive(Clone, Debug)]
pub(crate) struct ConvBlock {
    conv: Conv,
    bn: BatchNorm,
}

impl ConvBlock {
    pub fn new<T: Real, R: Rng + ?Sized>(
        params: &mut NetworkParams<T>,
        rng: &mut R,
        name: &str,
        cin: usize,
        cout: usize,
        k: usize,
    ) -> Self {
        Self {
            conv: Conv::same(params, rng, &format!("{name}.conv"), cin, cout, k),
            bn: BatchNorm::new(params, rng, &format!("{name}.bn"), cout),
        }
    }

    pub fn forward<T: Real>(&self, cx: &mut Ctx<'_, T>, x: Var) -> Result<Var> {
        let y = self.conv.forward(cx, x)?;
        let y = self.bn.forward(cx, y)?;
        cx.tape.relu(y)
    }
}

/// `x + BN(conv3(ConvBlock3(x)))`.
#[derive(Clone, Debug)]
pub(crate) struct ResBlock {
    block: ConvBlock,
    conv: Conv,
    bn: BatchNorm,
}

impl ResBlock {
    pub fn new<T: Real, R: Rng + ?Sized>(params: &mut NetworkParams<T>, rng: &mut R, name: &str, c: usize) -> Self {
        Self {
            block: ConvBlock::new(params, rng, &format!("{name}.block"), c, c, 3),
            conv: Conv::same(params, rng, &format!("{name}.conv"), c, c, 3),
            bn: BatchNorm::new(params, rng, &format!("{name}.bn"), c),
        }
    }

    pub fn forward<T: Real>(&self, cx: &mut Ctx<'_, T>, x: Var) -> Result<Var> {
        let y = self.block.forward(cx, x)?;
        let y = self.conv.forward(cx, y)?;
        let y = self.bn.forward(cx, y)?;
        cx.tape.add(x, y)
    }
}

/// Three densely connected 3×3 ConvBlocks; each sees the block input and all
/// earlier outputs. Returns the concatenated outputs.
#[derive(Clone, Debug)]
pub(crate) struct DenseBlock {
    blocks: Vec<ConvBlock>,
}

pub(crate) const DENSE_LAYERS: usize = 3;

impl DenseBlock {
    pub fn new<T: Real, R: Rng + ?Sized>(
        params: &mut NetworkParams<T>,
        rng: &mut R,
        name: &str,
        cin: usize,
        growth: usize,
    ) -> Self {
        let blocks = (0..DENSE_LAYERS)
            .map(|i| ConvBlock::new(params, rng, &format!("{name}.{i}"), cin + i * growth, growth, 3))
            .collect();
        Self { blocks }
    }

    pub fn forward<T: Real>(&self, cx: &mut Ctx<'_, T>, x: Var) -> Result<Var> {
        let mut feats = alloc::vec![x];
        for block in &self.blocks {
            let input = if feats.len() == 1 { x } else { cx.tape.concat_channels(&feats)? };
            feats.push(block.forward(cx, input)?);
        }
        cx.tape.concat_channels(&feats[1..])
    }
}
