use rand::Rng;

use super::layers::{Conv, Ctx};
use super::{check_divisible, impl_network, ArchConfig};
use crate::autodiff::{NormMode, PoolKind, ReduceOp, Tape, Var};
use crate::error::{bail, Result};
use crate::params::{Binding, NetworkParams};
use crate::Real;

const GROUPS: usize = 4;
const FUSED: usize = 3 * GROUPS;

/// Channel–spatial attention fusion of the defogged image with the three
/// derived inputs of the foggy source.
#[derive(Clone, Debug)]
pub struct AttentionFusion<T> {
    params: NetworkParams<T>,
    init: Conv,
    squeeze: Conv,
    excite: Conv,
    spatial: Conv,
}

impl_network!(AttentionFusion);

/// Intermediate attention maps, exposed for inspection.
#[derive(Clone, Copy, Debug)]
pub struct AttentionMaps {
    pub channel: Var,
    pub spatial: Var,
}

impl<T: Real> AttentionFusion<T> {
    pub const TAG: &'static str = "ctr";

    pub fn new<R: Rng + ?Sized>(cfg: &ArchConfig, rng: &mut R) -> Self {
        let mut p = NetworkParams::new(Self::TAG, cfg.width_scale);
        let hidden = (FUSED / cfg.attention_reduction).max(1);
        let init = Conv::same(&mut p, rng, "init", FUSED, FUSED, 3);
        let squeeze = Conv::new(&mut p, rng, "ca.squeeze", FUSED, hidden, 1, 1, 0);
        let excite = Conv::new(&mut p, rng, "ca.excite", hidden, FUSED, 1, 1, 0);
        let spatial = Conv::same(&mut p, rng, "sa", 2, 1, 3);
        Self { params: p, init, squeeze, excite, spatial }
    }

    /// Inputs in order: defogged, contrast-enhanced, gamma-corrected,
    /// white-balanced; all N×3×H×W signed.
    pub fn forward(&mut self, tape: &mut Tape<T>, bind: &Binding, images: [Var; GROUPS]) -> Result<Var> {
        Ok(self.forward_with_maps(tape, bind, images)?.0)
    }

    pub fn forward_with_maps(
        &mut self,
        tape: &mut Tape<T>,
        bind: &Binding,
        images: [Var; GROUPS],
    ) -> Result<(Var, AttentionMaps)> {
        let shape = tape.shape(images[0]).to_vec();
        check_divisible(&shape, 1, "attention fusion")?;
        if images.iter().any(|&v| tape.shape(v) != shape.as_slice()) {
            bail!(Dimension, "attention fusion inputs differ in shape");
        }
        let cx = &mut Ctx { tape, bind, params: &mut self.params, mode: NormMode::Eval };
        let fct = cx.tape.concat_channels(&images)?;
        let f = self.init.forward(cx, fct)?;

        // Channel attention: shared bottleneck over avg- and max-pooled vectors.
        let avg = cx.tape.global_pool(f, PoolKind::Avg)?;
        let max = cx.tape.global_pool(f, PoolKind::Max)?;
        let mut branches = [avg, max];
        for v in &mut branches {
            let h = self.squeeze.forward(cx, *v)?;
            let h = cx.tape.relu(h)?;
            *v = self.excite.forward(cx, h)?;
        }
        let logits = cx.tape.add(branches[0], branches[1])?;
        let wc = cx.tape.sigmoid(logits)?;

        // Weighted sum of the four 3-channel inputs.
        let mut fused = None;
        for (g, &img) in images.iter().enumerate() {
            let w = cx.tape.slice_channels(wc, 3 * g, 3)?;
            let term = cx.tape.mul(w, img)?;
            fused = Some(match fused {
                None => term,
                Some(acc) => cx.tape.add(acc, term)?,
            });
        }
        let fused = fused.expect("four groups");

        // Spatial attention from channelwise mean and max.
        let mean = cx.tape.reduce(fused, ReduceOp::Mean, &[1])?;
        let max = cx.tape.reduce(fused, ReduceOp::Max, &[1])?;
        let s = cx.tape.concat_channels(&[mean, max])?;
        let s = self.spatial.forward(cx, s)?;
        let ws = cx.tape.sigmoid(s)?;

        let out = cx.tape.mul(ws, fused)?;
        let out = cx.tape.clamp(out, -T::one(), T::one())?;
        Ok((out, AttentionMaps { channel: wc, spatial: ws }))
    }
}
