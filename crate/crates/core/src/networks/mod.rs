//! The generator and discriminator architectures.
//!
//! Every network owns a [`NetworkParams`] and exposes a `forward` that records
//! onto a caller-supplied [`Tape`] using a [`Binding`] of those parameters.
//! Widths are the full-scale widths divided by [`ArchConfig::width_scale`].

mod ctr;
mod defog;
mod discriminator;
pub(crate) mod layers;
mod ssm;
mod transmission;

use alloc::vec::Vec;

use crate::error::{bail, Result};
use crate::params::NetworkParams;
use crate::{Real, Tensor};

pub use ctr::{AttentionFusion, AttentionMaps};
pub use defog::{DefogGenerator, DefogOutput};
pub use discriminator::{discriminator_output_size, Discriminator};
pub use ssm::{SkySegmentation, SsmOutput};
pub use transmission::{synthesize_with, TransmissionNet};

/// Architecture hyperparameters shared by all networks.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ArchConfig {
    pub width_scale: usize,
    pub image_size: usize,
    /// Residual blocks in the defogging generator bottleneck.
    pub resblocks: usize,
    /// Residual blocks in the sky segmentation block.
    pub ssm_resblocks: usize,
    /// Channel-attention bottleneck reduction.
    pub attention_reduction: usize,
}

impl ArchConfig {
    /// Full-size configuration (256×256 inputs, unscaled widths).
    pub const fn full_scale() -> Self {
        Self { width_scale: 1, image_size: 256, resblocks: 6, ssm_resblocks: 6, attention_reduction: 4 }
    }

    /// Desk-scale default: 64×64 inputs, widths divided by 4.
    pub const fn desk() -> Self {
        Self { width_scale: 4, image_size: 64, resblocks: 6, ssm_resblocks: 6, attention_reduction: 4 }
    }

    pub fn validate(&self) -> Result<()> {
        if self.width_scale == 0 {
            bail!(Config, "width_scale must be positive");
        }
        if self.image_size == 0 || self.image_size % 4 != 0 {
            bail!(Config, "image_size {} must be a positive multiple of 4", self.image_size);
        }
        if self.attention_reduction == 0 {
            bail!(Config, "attention_reduction must be positive");
        }
        Ok(())
    }

    /// A full-scale channel count divided by the width scale, at least 1.
    pub fn width(&self, full: usize) -> usize {
        (full / self.width_scale).max(1)
    }
}

impl Default for ArchConfig {
    fn default() -> Self {
        Self::desk()
    }
}

/// Shared access to the parameters of any network.
pub trait Network<T: Real> {
    fn params(&self) -> &NetworkParams<T>;
    fn params_mut(&mut self) -> &mut NetworkParams<T>;
}

macro_rules! impl_network {
    ($ty:ident) => {
        impl<T: $crate::Real> $crate::networks::Network<T> for $ty<T> {
            fn params(&self) -> &$crate::params::NetworkParams<T> {
                &self.params
            }

            fn params_mut(&mut self) -> &mut $crate::params::NetworkParams<T> {
                &mut self.params
            }
        }
    };
}
pub(crate) use impl_network;

pub(crate) fn check_divisible(shape: &[usize], by: usize, what: &str) -> Result<()> {
    let (_, c, h, w) = crate::tensor::dims4(shape)?;
    if c != 3 {
        bail!(Dimension, "{what} expects 3 input channels, got {c}");
    }
    if h == 0 || w == 0 || h % by != 0 || w % by != 0 {
        bail!(Config, "{what} needs H and W divisible by {by}, got {h}×{w}");
    }
    Ok(())
}

/// Per-sample airlight tensor of shape N×3×1×1.
pub fn airlight_tensor<T: Real>(airlights: &[[f64; 3]]) -> Tensor<T> {
    let data: Vec<T> = airlights.iter().flat_map(|a| a.iter().map(|&v| T::lit(v))).collect();
    Tensor::new(&[airlights.len(), 3, 1, 1], data).expect("airlight shape")
}
