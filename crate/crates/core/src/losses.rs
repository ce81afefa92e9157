//! Training objectives: least-squares adversarial terms, cycle consistency,
//! a fixed-feature perceptual distance and the weighted total.

use alloc::format;
use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::autodiff::{Tape, Var};
use crate::error::{bail, Result};
use crate::networks::layers::{Conv, Ctx};
use crate::params::{Binding, NetworkParams};
use crate::Real;

/// Weights of the six generator objective terms.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossWeights {
    pub adv_r: f64,
    pub adv_ctr: f64,
    pub adv_s: f64,
    pub cyc_fog: f64,
    pub cyc_fogfree: f64,
    pub perceptual: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self { adv_r: 10.0, adv_ctr: 10.0, adv_s: 10.0, cyc_fog: 5.0, cyc_fogfree: 5.0, perceptual: 1.0 }
    }
}

impl LossWeights {
    pub fn as_array(&self) -> [f64; 6] {
        [self.adv_r, self.adv_ctr, self.adv_s, self.cyc_fog, self.cyc_fogfree, self.perceptual]
    }

    pub fn validate(&self) -> Result<()> {
        if self.as_array().iter().any(|w| !w.is_finite() || *w < 0.0) {
            bail!(Config, "loss weights must be finite and non-negative: {:?}", self.as_array());
        }
        Ok(())
    }

    /// Weighted sum of already-evaluated components.
    pub fn total(&self, c: &LossComponents) -> Result<f64> {
        let values = c.as_array();
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            bail!(NonFinite, "loss component {} is {}", LossComponents::NAMES[i], values[i]);
        }
        Ok(self.as_array().iter().zip(values).map(|(w, v)| w * v).sum())
    }

    /// Weighted sum of six scalar tape values, in [`LossComponents::NAMES`] order.
    pub fn total_on_tape<T: Real>(&self, tape: &mut Tape<T>, components: [Var; 6]) -> Result<Var> {
        let mut acc: Option<Var> = None;
        for (w, c) in self.as_array().into_iter().zip(components) {
            let term = tape.scale(c, T::lit(w))?;
            acc = Some(match acc {
                None => term,
                Some(a) => tape.add(a, term)?,
            });
        }
        Ok(acc.expect("six terms"))
    }
}

/// Values of the six generator objective terms.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct LossComponents {
    pub adv_r: f64,
    pub adv_ctr: f64,
    pub adv_s: f64,
    pub cyc1: f64,
    pub cyc2: f64,
    pub perc: f64,
}

impl LossComponents {
    pub const NAMES: [&'static str; 6] = ["adv_r", "adv_ctr", "adv_s", "cyc1", "cyc2", "perc"];

    pub fn as_array(&self) -> [f64; 6] {
        [self.adv_r, self.adv_ctr, self.adv_s, self.cyc1, self.cyc2, self.perc]
    }

    pub fn from_array(v: [f64; 6]) -> Self {
        Self { adv_r: v[0], adv_ctr: v[1], adv_s: v[2], cyc1: v[3], cyc2: v[4], perc: v[5] }
    }
}

fn mean_square_offset<T: Real>(tape: &mut Tape<T>, x: Var, target: f64) -> Result<Var> {
    let d = tape.affine(x, T::one(), T::lit(-target))?;
    let sq = tape.mul(d, d)?;
    tape.mean_all(sq)
}

/// Generator side of the least-squares GAN objective: `mean((fake − 1)²)`.
pub fn lsgan_generator<T: Real>(tape: &mut Tape<T>, fake_logits: Var) -> Result<Var> {
    mean_square_offset(tape, fake_logits, 1.0)
}

/// Discriminator side: `mean((real − 1)²) + mean(fake²)`.
pub fn lsgan_discriminator<T: Real>(tape: &mut Tape<T>, real_logits: Var, fake_logits: Var) -> Result<Var> {
    let r = mean_square_offset(tape, real_logits, 1.0)?;
    let f = mean_square_offset(tape, fake_logits, 0.0)?;
    tape.add(r, f)
}

/// `mse(original, first) + mse(original, second)`; used for both the foggy
/// and the fog-free cycles.
pub fn cycle_loss<T: Real>(tape: &mut Tape<T>, original: Var, first: Var, second: Var) -> Result<Var> {
    if tape.shape(original) != tape.shape(first) || tape.shape(original) != tape.shape(second) {
        bail!(Dimension, "cycle loss operands differ in shape");
    }
    let a = tape.mse(original, first)?;
    let b = tape.mse(original, second)?;
    tape.add(a, b)
}

/// Seed of the fixed perceptual feature extractor.
pub const PERCEPTUAL_SEED: u64 = 0xC0FFEE;
const STAGE_CHANNELS: [usize; 5] = [16, 32, 64, 64, 64];
const STAGE_STRIDES: [usize; 5] = [1, 2, 1, 2, 1];
/// Zero-based stages whose activations are compared (the 2nd and 5th).
const TAPS: [usize; 2] = [1, 4];

/// Untrained convolutional feature stack standing in for a pretrained
/// classifier. Its weights are He-normal draws from [`PERCEPTUAL_SEED`] and
/// are never updated.
#[derive(Clone, Debug)]
pub struct PerceptualExtractor<T> {
    params: NetworkParams<T>,
    stages: Vec<Conv>,
}

impl<T: Real> Default for PerceptualExtractor<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Real> PerceptualExtractor<T> {
    pub fn new() -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(PERCEPTUAL_SEED);
        let mut params = NetworkParams::new("perceptual", 1);
        let mut cin = 3;
        let stages = STAGE_CHANNELS
            .iter()
            .zip(STAGE_STRIDES)
            .enumerate()
            .map(|(i, (&cout, stride))| {
                let std = num_traits::Float::sqrt(2.0 / (cin * 9) as f64);
                let conv = Conv::with_std(&mut params, &mut rng, &format!("stage{i}"), cin, cout, 3, stride, 1, std);
                cin = cout;
                conv
            })
            .collect();
        Self { params, stages }
    }

    pub fn params(&self) -> &NetworkParams<T> {
        &self.params
    }

    /// Binds the weights as constants.
    pub fn bind(&self, tape: &mut Tape<T>) -> Binding {
        self.params.bind(tape, false)
    }

    /// Activations at the two tap stages.
    pub fn features(&mut self, tape: &mut Tape<T>, bind: &Binding, x: Var) -> Result<[Var; 2]> {
        let cx = &mut Ctx { tape, bind, params: &mut self.params, mode: crate::autodiff::NormMode::Eval };
        let mut taps = [x; 2];
        let mut f = x;
        for (i, conv) in self.stages.iter().enumerate() {
            let y = conv.forward(cx, f)?;
            f = cx.tape.relu(y)?;
            if let Some(slot) = TAPS.iter().position(|&t| t == i) {
                taps[slot] = f;
            }
        }
        Ok(taps)
    }

    /// Σ over pairs Σ over taps of the mean-squared feature distance.
    pub fn loss(&mut self, tape: &mut Tape<T>, bind: &Binding, pairs: &[(Var, Var)]) -> Result<Var> {
        let mut acc: Option<Var> = None;
        for &(a, b) in pairs {
            if tape.shape(a) != tape.shape(b) {
                bail!(Dimension, "perceptual pair shapes differ: {:?} vs {:?}", tape.shape(a), tape.shape(b));
            }
            let fa = self.features(tape, bind, a)?;
            let fb = self.features(tape, bind, b)?;
            for (x, y) in fa.into_iter().zip(fb) {
                let term = tape.mse(x, y)?;
                acc = Some(match acc {
                    None => term,
                    Some(s) => tape.add(s, term)?,
                });
            }
        }
        match acc {
            Some(v) => Ok(v),
            None => Ok(tape.constant(crate::Tensor::scalar(T::zero()))),
        }
    }
}
