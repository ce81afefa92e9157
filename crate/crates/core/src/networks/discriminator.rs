use alloc::format;
use alloc::vec::Vec;

use rand::Rng;

use super::layers::{BatchNorm, Conv, Ctx, LEAKY_SLOPE};
use super::{impl_network, ArchConfig};
use crate::autodiff::{NormMode, Padding, Tape, Var};
use crate::error::{bail, Result};
use crate::params::{Binding, NetworkParams};
use crate::Real;

const KERNEL: usize = 4;
const FILTERS: [usize; 5] = [64, 128, 256, 512, 512];
const STRIDES: [usize; 6] = [2, 2, 2, 1, 1, 1];

/// Padding of each layer. The fifth layer pads asymmetrically so that it
/// preserves size; together with the stride schedule this yields a 30×30
/// patch map for 256×256 inputs and 6×6 for 64×64.
fn layer_padding(i: usize) -> Padding {
    if i == 4 {
        Padding::same(KERNEL)
    } else {
        Padding::uniform(1)
    }
}

/// Spatial size of the patch-logit map for an input of extent `size`, or
/// `None` when the input is too small.
pub fn discriminator_output_size(size: usize) -> Option<usize> {
    let mut s = size;
    for (i, &stride) in STRIDES.iter().enumerate() {
        let p = layer_padding(i);
        let padded = s + p.top + p.bottom;
        if padded < KERNEL {
            return None;
        }
        s = (padded - KERNEL) / stride + 1;
    }
    Some(s)
}

/// Six-layer PatchGAN discriminator producing raw per-patch logits.
#[derive(Clone, Debug)]
pub struct Discriminator<T> {
    params: NetworkParams<T>,
    convs: Vec<Conv>,
    norms: Vec<BatchNorm>,
}

impl_network!(Discriminator);

impl<T: Real> Discriminator<T> {
    /// `tag` distinguishes the fog-free and foggy discriminators.
    pub fn new<R: Rng + ?Sized>(tag: &str, cfg: &ArchConfig, rng: &mut R) -> Self {
        let mut p = NetworkParams::new(tag, cfg.width_scale);
        let mut widths: Vec<usize> = FILTERS.iter().map(|&f| cfg.width(f)).collect();
        widths.push(1);
        let mut cin = 3;
        let mut convs = Vec::new();
        let mut norms = Vec::new();
        for (i, &cout) in widths.iter().enumerate() {
            convs.push(Conv::new(&mut p, rng, &format!("l{i}"), cin, cout, KERNEL, STRIDES[i], layer_padding(i)));
            if (1..5).contains(&i) {
                norms.push(BatchNorm::new(&mut p, rng, &format!("l{i}.bn"), cout));
            }
            cin = cout;
        }
        Self { params: p, convs, norms }
    }

    pub fn forward(&mut self, tape: &mut Tape<T>, bind: &Binding, x: Var, mode: NormMode) -> Result<Var> {
        let shape = tape.shape(x);
        if shape.len() != 4 || discriminator_output_size(shape[2]).is_none() || discriminator_output_size(shape[3]).is_none() {
            bail!(Geometry, "discriminator input {:?} is too small", shape);
        }
        let cx = &mut Ctx { tape, bind, params: &mut self.params, mode };
        let mut f = x;
        for (i, conv) in self.convs.iter().enumerate() {
            f = conv.forward(cx, f)?;
            if (1..5).contains(&i) {
                f = self.norms[i - 1].forward(cx, f)?;
            }
            if i < 5 {
                f = cx.tape.leaky_relu(f, LEAKY_SLOPE)?;
            }
        }
        Ok(f)
    }
}
