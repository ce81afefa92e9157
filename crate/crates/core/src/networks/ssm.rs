use alloc::format;
use alloc::vec::Vec;

use rand::Rng;

use super::layers::{Conv, ConvBlock, Ctx, ResBlock, UpConv};
use super::{check_divisible, impl_network, ArchConfig};
use crate::autodiff::{NormMode, Tape, Var};
use crate::error::Result;
use crate::params::{Binding, NetworkParams};
use crate::{Real, Tensor};

/// Sky segmentation model: an enhance block producing a fog-suppressed image
/// and a segmentation block producing a per-pixel sky probability.
#[derive(Clone, Debug)]
pub struct SkySegmentation<T> {
    params: NetworkParams<T>,
    enhance: Enhance,
    segment: Segment,
}

#[derive(Clone, Debug)]
struct Enhance {
    e1: Conv,
    e2: Conv,
    e3: Conv,
    d1: UpConv,
    d2: UpConv,
    d3: UpConv,
    fuse: Conv,
    out: Conv,
}

#[derive(Clone, Debug)]
struct Segment {
    e1: ConvBlock,
    e2: Conv,
    e3: Conv,
    res: Vec<ResBlock>,
    d1: UpConv,
    d2_conv: Conv,
    d2: UpConv,
    out_conv: Conv,
    out: Conv,
}

#[derive(Clone, Copy, Debug)]
pub struct SsmOutput {
    /// N×3×H×W in [−1,1].
    pub enhanced: Var,
    /// N×1×H×W in [0,1].
    pub sky_prob: Var,
}

impl_network!(SkySegmentation);

impl<T: Real> SkySegmentation<T> {
    pub const TAG: &'static str = "ssm";

    pub fn new<R: Rng + ?Sized>(cfg: &ArchConfig, rng: &mut R) -> Self {
        let mut p = NetworkParams::new(Self::TAG, cfg.width_scale);
        let c = cfg.width(64);
        let enhance = Enhance {
            e1: Conv::new(&mut p, rng, "enh.e1", 3, c, 4, 2, 1),
            e2: Conv::new(&mut p, rng, "enh.e2", c, 2 * c, 4, 2, 1),
            e3: Conv::new(&mut p, rng, "enh.e3", 2 * c, 4 * c, 4, 2, 1),
            d1: UpConv::new(&mut p, rng, "enh.d1", 4 * c, 2 * c, 4),
            d2: UpConv::new(&mut p, rng, "enh.d2", 4 * c, c, 4),
            d3: UpConv::new(&mut p, rng, "enh.d3", 2 * c, c, 4),
            fuse: Conv::new(&mut p, rng, "enh.fuse", 11 * c, c, 1, 1, 0),
            out: Conv::same(&mut p, rng, "enh.out", c, 3, 3),
        };
        let segment = Segment {
            e1: ConvBlock::new(&mut p, rng, "seg.e1", 3, c, 7),
            e2: Conv::new(&mut p, rng, "seg.e2", c, 2 * c, 3, 2, 1),
            e3: Conv::new(&mut p, rng, "seg.e3", 2 * c, 4 * c, 3, 2, 1),
            res: (0..cfg.ssm_resblocks).map(|i| ResBlock::new(&mut p, rng, &format!("seg.res{i}"), 4 * c)).collect(),
            d1: UpConv::new(&mut p, rng, "seg.d1", 4 * c, 2 * c, 3),
            d2_conv: Conv::same(&mut p, rng, "seg.d2.conv", 4 * c, 2 * c, 3),
            d2: UpConv::new(&mut p, rng, "seg.d2", 2 * c, c, 3),
            out_conv: Conv::same(&mut p, rng, "seg.out.conv", 2 * c, c, 3),
            out: Conv::same(&mut p, rng, "seg.out", c, 1, 7),
        };
        Self { params: p, enhance, segment }
    }

    pub fn forward(&mut self, tape: &mut Tape<T>, bind: &Binding, x: Var, mode: NormMode) -> Result<SsmOutput> {
        check_divisible(tape.shape(x), 8, "sky segmentation model")?;
        let cx = &mut Ctx { tape, bind, params: &mut self.params, mode };
        let enhanced = self.enhance.forward(cx, x)?;
        let sky_prob = self.segment.forward(cx, x)?;
        Ok(SsmOutput { enhanced, sky_prob })
    }

    /// Evaluation-mode sky probability for an N×3×H×W signed tensor.
    pub fn infer(&mut self, input: &Tensor<T>) -> Result<(Tensor<T>, Tensor<T>)> {
        let mut tape = Tape::new();
        let bind = self.params.bind(&mut tape, false);
        let x = tape.constant(input.clone());
        let out = self.forward(&mut tape, &bind, x, NormMode::Eval)?;
        Ok((tape.value(out.enhanced).clone(), tape.value(out.sky_prob).clone()))
    }
}

impl Enhance {
    fn forward<T: Real>(&self, cx: &mut Ctx<'_, T>, x: Var) -> Result<Var> {
        let e1 = self.e1.forward(cx, x)?;
        let e1 = cx.tape.relu(e1)?;
        let e2 = self.e2.forward(cx, e1)?;
        let e2 = cx.tape.relu(e2)?;
        let e3 = self.e3.forward(cx, e2)?;
        let e3 = cx.tape.relu(e3)?;

        let d1 = self.d1.forward(cx, e3)?;
        let s2 = cx.tape.concat_channels(&[d1, e2])?;
        let d2 = self.d2.forward(cx, s2)?;
        let s1 = cx.tape.concat_channels(&[d2, e1])?;
        let d3 = self.d3.forward(cx, s1)?;

        // Dense fusion of every decoder scale, brought to full resolution.
        let u3 = cx.tape.upsample_nearest(e3, 8)?;
        let u2 = cx.tape.upsample_nearest(s2, 4)?;
        let u1 = cx.tape.upsample_nearest(s1, 2)?;
        let f = cx.tape.concat_channels(&[u3, u2, u1, d3])?;
        let f = self.fuse.forward(cx, f)?;
        let f = cx.tape.relu(f)?;
        let f = self.out.forward(cx, f)?;
        cx.tape.tanh(f)
    }
}

impl Segment {
    fn forward<T: Real>(&self, cx: &mut Ctx<'_, T>, x: Var) -> Result<Var> {
        let e1 = self.e1.forward(cx, x)?;
        let e2 = self.e2.forward(cx, e1)?;
        let e2 = cx.tape.relu(e2)?;
        let e3 = self.e3.forward(cx, e2)?;
        let mut f = cx.tape.relu(e3)?;
        for block in &self.res {
            f = block.forward(cx, f)?;
        }
        let d1 = self.d1.forward(cx, f)?;
        let s = cx.tape.concat_channels(&[d1, e2])?;
        let s = self.d2_conv.forward(cx, s)?;
        let s = cx.tape.relu(s)?;
        let d2 = self.d2.forward(cx, s)?;
        let s = cx.tape.concat_channels(&[d2, e1])?;
        let s = self.out_conv.forward(cx, s)?;
        let s = cx.tape.relu(s)?;
        let o = self.out.forward(cx, s)?;
        let o = cx.tape.tanh(o)?;
        let half = T::lit(0.5);
        cx.tape.affine(o, half, half)
    }
}
