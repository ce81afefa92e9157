use alloc::format;
use alloc::vec::Vec;

use rand::Rng;

use super::layers::{BatchNorm, Conv, ConvBlock, Ctx, DenseBlock, ResBlock, UpConv, DENSE_LAYERS};
use super::{check_divisible, impl_network, ArchConfig};
use crate::autodiff::{NormMode, PoolKind, Tape, Var};
use crate::error::Result;
use crate::params::{Binding, NetworkParams};
use crate::{Real, Tensor};

/// Densely-residual encoder–decoder that maps a foggy image to a fog-free
/// one. All tensors are in the signed range.
#[derive(Clone, Debug)]
pub struct DefogGenerator<T> {
    params: NetworkParams<T>,
    layers: Layers,
}

#[derive(Clone, Debug)]
struct Layers {
    enc1: ConvBlock,
    dense1: DenseBlock,
    dense1_bn: BatchNorm,
    dense1_proj: Conv,
    enc2: ConvBlock,
    dense2: DenseBlock,
    dense2_bn: BatchNorm,
    dense2_proj: Conv,
    res: Vec<ResBlock>,
    up1: UpConv,
    dec1: ConvBlock,
    dec1_proj: Conv,
    up2: UpConv,
    dec2: ConvBlock,
    dec2_proj: Conv,
    out: Conv,
}

/// Generator output together with the encoder bottleneck features.
#[derive(Clone, Copy, Debug)]
pub struct DefogOutput {
    pub image: Var,
    pub bottleneck: Var,
}

impl_network!(DefogGenerator);

impl<T: Real> DefogGenerator<T> {
    pub const TAG: &'static str = "defog";

    pub fn new<R: Rng + ?Sized>(cfg: &ArchConfig, rng: &mut R) -> Self {
        let mut p = NetworkParams::new(Self::TAG, cfg.width_scale);
        let c1 = cfg.width(64);
        let g = cfg.width(32);
        let dense_out = DENSE_LAYERS * g;
        let layers = Layers {
            enc1: ConvBlock::new(&mut p, rng, "enc1", 3, c1, 7),
            dense1: DenseBlock::new(&mut p, rng, "dense1", c1, g),
            dense1_bn: BatchNorm::new(&mut p, rng, "dense1.bn", dense_out),
            dense1_proj: Conv::new(&mut p, rng, "dense1.proj", dense_out, c1, 1, 1, 0),
            enc2: ConvBlock::new(&mut p, rng, "enc2", 2 * c1, 2 * c1, 3),
            dense2: DenseBlock::new(&mut p, rng, "dense2", 2 * c1, g),
            dense2_bn: BatchNorm::new(&mut p, rng, "dense2.bn", dense_out),
            dense2_proj: Conv::new(&mut p, rng, "dense2.proj", dense_out, 2 * c1, 1, 1, 0),
            res: (0..cfg.resblocks).map(|i| ResBlock::new(&mut p, rng, &format!("res{i}"), 4 * c1)).collect(),
            up1: UpConv::new(&mut p, rng, "up1", 4 * c1, 2 * c1, 3),
            dec1: ConvBlock::new(&mut p, rng, "dec1", 4 * c1, 2 * c1, 3),
            dec1_proj: Conv::new(&mut p, rng, "dec1.proj", 2 * c1, 2 * c1, 1, 1, 0),
            up2: UpConv::new(&mut p, rng, "up2", 2 * c1, c1, 3),
            dec2: ConvBlock::new(&mut p, rng, "dec2", 2 * c1, c1, 3),
            dec2_proj: Conv::new(&mut p, rng, "dec2.proj", c1, c1, 1, 1, 0),
            out: Conv::same(&mut p, rng, "out", c1, 3, 7),
        };
        Self { params: p, layers }
    }

    /// Channels of the encoder bottleneck (256 at full scale).
    pub fn bottleneck_channels(&self) -> usize {
        4 * (64 / self.params.width_scale()).max(1)
    }

    pub fn forward(&mut self, tape: &mut Tape<T>, bind: &Binding, x: Var, mode: NormMode) -> Result<DefogOutput> {
        check_divisible(tape.shape(x), 4, "defogging generator")?;
        let l = &self.layers;
        let cx = &mut Ctx { tape, bind, params: &mut self.params, mode };

        // Stage 1: 7×7 block, dense block, 1×1 projection, pooling.
        let fc1 = l.enc1.forward(cx, x)?;
        let d = l.dense1.forward(cx, fc1)?;
        let d = l.dense1_bn.forward(cx, d)?;
        let d = l.dense1_proj.forward(cx, d)?;
        let p_skip = cx.tape.pool(fc1, PoolKind::Avg, 2, 2)?;
        let p_dense = cx.tape.pool(d, PoolKind::Avg, 2, 2)?;
        let fen1 = cx.tape.concat_channels(&[p_skip, p_dense])?;

        // Stage 2 at half resolution.
        let fc2 = l.enc2.forward(cx, fen1)?;
        let d = l.dense2.forward(cx, fc2)?;
        let d = l.dense2_bn.forward(cx, d)?;
        let d = l.dense2_proj.forward(cx, d)?;
        let p_skip = cx.tape.pool(fc2, PoolKind::Avg, 2, 2)?;
        let p_dense = cx.tape.pool(d, PoolKind::Avg, 2, 2)?;
        let mut f = cx.tape.concat_channels(&[p_skip, p_dense])?;

        for block in &l.res {
            f = block.forward(cx, f)?;
        }
        let bottleneck = f;

        // Decoder with skips from the two encoder stages.
        let u = l.up1.forward(cx, f)?;
        let u = cx.tape.relu(u)?;
        let u = cx.tape.concat_channels(&[u, fc2])?;
        let u = l.dec1.forward(cx, u)?;
        let u = l.dec1_proj.forward(cx, u)?;
        let u = cx.tape.relu(u)?;

        let u = l.up2.forward(cx, u)?;
        let u = cx.tape.relu(u)?;
        let u = cx.tape.concat_channels(&[u, fc1])?;
        let u = l.dec2.forward(cx, u)?;
        let u = l.dec2_proj.forward(cx, u)?;
        let u = cx.tape.relu(u)?;

        let y = l.out.forward(cx, u)?;
        let image = cx.tape.tanh(y)?;
        Ok(DefogOutput { image, bottleneck })
    }

    /// Evaluation-mode inference on an N×3×H×W signed tensor.
    pub fn infer(&mut self, input: &Tensor<T>) -> Result<Tensor<T>> {
        let mut tape = Tape::new();
        let bind = self.params.bind(&mut tape, false);
        let x = tape.constant(input.clone());
        let out = self.forward(&mut tape, &bind, x, NormMode::Eval)?;
        Ok(tape.value(out.image).clone())
    }
}
