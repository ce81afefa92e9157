//! White-balanced, contrast-enhanced and gamma-corrected variants of a foggy
//! image, consumed by the attention-fusion generator.

use num_traits::Float;
use crate::error::{bail, Result};
use crate::image::{ImageRGB, Range};

/// Gamma exponent of the decoding gamma correction.
pub const GAMMA: f64 = 2.5;
/// Gain of the gamma correction.
pub const GAMMA_GAIN: f64 = 1.0;

/// The three derived inputs, each the same size as the source.
#[derive(Clone, Debug, PartialEq)]
pub struct DerivedInputs {
    pub wb: ImageRGB,
    pub ce: ImageRGB,
    pub gc: ImageRGB,
}

fn require_unit(image: &ImageRGB, op: &str) -> Result<()> {
    if image.range() != Range::Unit {
        bail!(Contract, "{} expects a unit-range image", op);
    }
    Ok(())
}

/// Gray-world gains `k_c = mean(channel means) / channel mean`.
pub fn gray_world_gains(image: &ImageRGB) -> Result<[f64; 3]> {
    let means = image.channel_means();
    if means.iter().any(|&m| m <= 0.0) {
        bail!(DegenerateInput, "white balance needs non-zero channel means, got {:?}", means);
    }
    let gray = (means[0] + means[1] + means[2]) / 3.0;
    Ok(means.map(|m| gray / m))
}

/// Gray-world white balance, clamped to `[0, 1]`.
pub fn white_balance(image: &ImageRGB) -> Result<ImageRGB> {
    require_unit(image, "white_balance")?;
    let gains = gray_world_gains(image)?;
    let mut out = image.clone();
    for p in out.pixels_mut().chunks_exact_mut(3) {
        for c in 0..3 {
            p[c] = (p[c] * gains[c]).clamp(0.0, 1.0);
        }
    }
    Ok(out)
}

/// Mean over every pixel and channel.
///
/// Accumulated relative to the minimum so that a constant image has a mean
/// exactly equal to its value.
pub fn mean_luminance(image: &ImageRGB) -> f64 {
    let px = image.pixels();
    let lo = px.iter().copied().fold(f64::INFINITY, f64::min);
    lo + px.iter().map(|v| v - lo).sum::<f64>() / px.len() as f64
}

/// `μ(I − Ī)` with `μ = 2(0.5 + Ī)`, before clamping.
pub fn contrast_enhance_unclamped(image: &ImageRGB) -> Result<ImageRGB> {
    require_unit(image, "contrast_enhance")?;
    let mean = mean_luminance(image);
    let mu = 2.0 * (0.5 + mean);
    let pixels = image.pixels().iter().map(|&v| mu * (v - mean)).collect();
    ImageRGB::new(image.height(), image.width(), Range::Unit, pixels)
}

pub fn contrast_enhance(image: &ImageRGB) -> Result<ImageRGB> {
    Ok(contrast_enhance_unclamped(image)?.clamped())
}

/// `α · I^γ` per component.
pub fn gamma_correct(image: &ImageRGB) -> Result<ImageRGB> {
    require_unit(image, "gamma_correct")?;
    let mut out = image.clone();
    out.pixels_mut().iter_mut().for_each(|v| *v = GAMMA_GAIN * Float::powf(*v, GAMMA));
    Ok(out)
}

/// Computes the three derived inputs in unit space and returns them in the
/// signed range the networks consume.
pub fn derive_inputs(image: &ImageRGB) -> Result<DerivedInputs> {
    Ok(DerivedInputs {
        wb: white_balance(image)?.to_signed()?,
        ce: contrast_enhance(image)?.to_signed()?,
        gc: gamma_correct(image)?.to_signed()?,
    })
}
