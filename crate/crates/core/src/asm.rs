//! Atmospheric scattering model `I = J·t + A·(1 − t)` with `t = exp(−β·d)`.

use num_traits::Float;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{bail, Result};
use crate::image::{ImageRGB, Range};

/// Lower bound applied to the transmission before inverting the model.
pub const T_FLOOR: f64 = 0.05;
/// Side of the square dark-channel minimum filter.
pub const DARK_CHANNEL_WINDOW: usize = 15;
/// Fraction of brightest dark-channel pixels searched for the airlight.
pub const DARK_CHANNEL_TOP_FRACTION: f64 = 0.001;
/// Minimum sky coverage before falling back to the dark channel.
pub const MIN_SKY_FRACTION: f64 = 0.01;

/// Per-pixel transmission in `(0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct TransmissionMap {
    height: usize,
    width: usize,
    values: Vec<f64>,
}

impl TransmissionMap {
    pub fn new(height: usize, width: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != height * width {
            bail!(Dimension, "transmission map {}x{} needs {} values", height, width, height * width);
        }
        if let Some(v) = values.iter().find(|&&v| !(v > 0.0 && v <= 1.0)) {
            bail!(Contract, "transmission {} outside (0, 1]", v);
        }
        Ok(Self { height, width, values })
    }

    pub fn constant(height: usize, width: usize, t: f64) -> Result<Self> {
        Self::new(height, width, vec![t; height * width])
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Global airlight colour, componentwise in `[0, 1]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AtmosphericLight(pub [f64; 3]);

impl AtmosphericLight {
    pub fn new(rgb: [f64; 3]) -> Result<Self> {
        if rgb.iter().any(|v| !(0.0..=1.0).contains(v)) {
            bail!(Contract, "airlight {:?} outside [0, 1]", rgb);
        }
        Ok(Self(rgb))
    }

    pub fn gray(v: f64) -> Result<Self> {
        Self::new([v; 3])
    }

    pub fn rgb(&self) -> [f64; 3] {
        self.0
    }
}

/// Where an airlight estimate came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AirlightSource {
    Sky,
    DarkChannelFallback,
}

/// `t = exp(−β·d)` for every depth sample.
pub fn transmission_from_depth(depth: &[f64], height: usize, width: usize, beta: f64) -> Result<TransmissionMap> {
    if depth.len() != height * width {
        bail!(Dimension, "depth map has {} samples, expected {}", depth.len(), height * width);
    }
    if beta < 0.0 || !beta.is_finite() {
        bail!(Contract, "scattering coefficient must be finite and non-negative, got {}", beta);
    }
    if let Some(d) = depth.iter().find(|d| !d.is_finite() || **d < 0.0) {
        bail!(Contract, "depth must be finite and non-negative, got {}", d);
    }
    // A transmission that underflows to zero would leave the map's domain.
    let values = depth.iter().map(|&d| Float::exp(-beta * d).max(f64::MIN_POSITIVE)).collect();
    TransmissionMap::new(height, width, values)
}

fn check_pair(image: &ImageRGB, t: &TransmissionMap) -> Result<()> {
    if image.height() != t.height || image.width() != t.width {
        bail!(
            Dimension,
            "image {}x{} and transmission {}x{} differ",
            image.height(),
            image.width(),
            t.height,
            t.width
        );
    }
    if image.range() != Range::Unit {
        bail!(Contract, "scattering model works on unit-range images");
    }
    Ok(())
}

/// Fogs a clear image.
pub fn synthesize_fog(clear: &ImageRGB, t: &TransmissionMap, a: AtmosphericLight) -> Result<ImageRGB> {
    check_pair(clear, t)?;
    let mut out = clear.clone();
    for (p, &tv) in out.pixels_mut().chunks_exact_mut(3).zip(&t.values) {
        for c in 0..3 {
            p[c] = p[c] * tv + a.0[c] * (1.0 - tv);
        }
    }
    Ok(out)
}

/// Recovers the clear image given transmission and airlight, flooring the
/// transmission at `t_floor` and clamping to `[0, 1]`.
pub fn invert_fog(foggy: &ImageRGB, t: &TransmissionMap, a: AtmosphericLight, t_floor: f64) -> Result<ImageRGB> {
    check_pair(foggy, t)?;
    if t_floor <= 0.0 {
        bail!(Contract, "t_floor must be positive");
    }
    let mut out = foggy.clone();
    for (p, &tv) in out.pixels_mut().chunks_exact_mut(3).zip(&t.values) {
        let tt = tv.max(t_floor);
        for c in 0..3 {
            p[c] = ((p[c] - a.0[c] * (1.0 - tt)) / tt).clamp(0.0, 1.0);
        }
    }
    Ok(out)
}

/// Channel minimum followed by a `window`×`window` minimum filter clipped at
/// the borders.
pub fn dark_channel(image: &ImageRGB, window: usize) -> Vec<f64> {
    let (h, w) = (image.height(), image.width());
    let r = window / 2;
    let mins: Vec<f64> = image.pixels().chunks_exact(3).map(|p| p[0].min(p[1]).min(p[2])).collect();
    // Separable min filter: rows, then columns.
    let mut rows = vec![0.0; h * w];
    for y in 0..h {
        for x in 0..w {
            let (x0, x1) = (x.saturating_sub(r), (x + r).min(w - 1));
            rows[y * w + x] = mins[y * w + x0..=y * w + x1].iter().copied().fold(f64::INFINITY, f64::min);
        }
    }
    let mut out = vec![0.0; h * w];
    for y in 0..h {
        let (y0, y1) = (y.saturating_sub(r), (y + r).min(h - 1));
        for x in 0..w {
            out[y * w + x] = (y0..=y1).map(|yy| rows[yy * w + x]).fold(f64::INFINITY, f64::min);
        }
    }
    out
}

/// Airlight from the brightest dark-channel pixels: candidates are the
/// `ceil(n·top_fraction)` highest dark-channel values (ties at the cut all
/// included); the brightest candidate by mean intensity wins, ties broken by
/// the larger RGB triple.
pub fn atmospheric_light_dark_channel(foggy: &ImageRGB, top_fraction: f64) -> AtmosphericLight {
    let dark = dark_channel(foggy, DARK_CHANNEL_WINDOW);
    let n = dark.len();
    let k = (Float::ceil(n as f64 * top_fraction) as usize).clamp(1, n);
    let mut sorted = dark.clone();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let cut = sorted[k - 1];
    let px = foggy.pixels();
    let mut best: Option<[f64; 3]> = None;
    for (i, &d) in dark.iter().enumerate() {
        if d < cut {
            continue;
        }
        let rgb = [px[3 * i], px[3 * i + 1], px[3 * i + 2]];
        let better = match best {
            None => true,
            Some(b) => {
                let (si, sb) = (rgb[0] + rgb[1] + rgb[2], b[0] + b[1] + b[2]);
                si > sb || (si == sb && rgb.iter().zip(&b).map(|(x, y)| x.total_cmp(y)).find(|o| o.is_ne()) == Some(core::cmp::Ordering::Greater))
            }
        };
        if better {
            best = Some(rgb);
        }
    }
    AtmosphericLight(best.expect("non-empty image").map(|v| v.clamp(0.0, 1.0)))
}

/// Mean colour over pixels whose sky probability exceeds 0.5; falls back to
/// the dark-channel estimate when they cover less than 1% of the image.
pub fn atmospheric_light_from_sky(foggy: &ImageRGB, sky_mask: &[f64]) -> Result<(AtmosphericLight, AirlightSource)> {
    let n = foggy.height() * foggy.width();
    if sky_mask.len() != n {
        bail!(Dimension, "sky mask has {} samples, image has {}", sky_mask.len(), n);
    }
    let mut sum = [0.0; 3];
    let mut count = 0usize;
    for (p, &m) in foggy.pixels().chunks_exact(3).zip(sky_mask) {
        if m > 0.5 {
            count += 1;
            for c in 0..3 {
                sum[c] += p[c];
            }
        }
    }
    if count == 0 || (count as f64) < MIN_SKY_FRACTION * n as f64 {
        return Ok((atmospheric_light_dark_channel(foggy, DARK_CHANNEL_TOP_FRACTION), AirlightSource::DarkChannelFallback));
    }
    let a = sum.map(|s| (s / count as f64).clamp(0.0, 1.0));
    Ok((AtmosphericLight(a), AirlightSource::Sky))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit(h: usize, w: usize, f: impl FnMut(usize, usize) -> [f64; 3]) -> ImageRGB {
        ImageRGB::from_fn(h, w, Range::Unit, f).unwrap()
    }

    #[test]
    fn transmission_examples() {
        let t = transmission_from_depth(&[0.0, core::f64::consts::LN_2, 50.0], 1, 3, 1.0).unwrap();
        assert_eq!(t.values()[0], 1.0);
        assert!((t.values()[1] - 0.5).abs() < 1e-15);
        let t = transmission_from_depth(&[50.0], 1, 1, 0.04).unwrap();
        assert!((t.values()[0] - 0.135_335_283_236_612_7).abs() < 1e-12);
        assert!(transmission_from_depth(&[-1.0], 1, 1, 1.0).is_err());
    }

    #[test]
    fn synthesize_examples() {
        let j = ImageRGB::filled(2, 2, Range::Unit, [0.8; 3]).unwrap();
        let a = AtmosphericLight::gray(0.9).unwrap();
        let one = TransmissionMap::constant(2, 2, 1.0).unwrap();
        assert_eq!(synthesize_fog(&j, &one, a).unwrap(), j);
        let q = TransmissionMap::constant(2, 2, 0.25).unwrap();
        let i = synthesize_fog(&j, &q, a).unwrap();
        assert!(i.pixels().iter().all(|&v| (v - 0.875).abs() < 1e-15));
        // t → 0 (smallest representable) gives A.
        let z = transmission_from_depth(&[1e6; 4], 2, 2, 1.0).unwrap();
        let i = synthesize_fog(&j, &z, a).unwrap();
        assert!(i.pixels().iter().all(|&v| (v - 0.9).abs() < 1e-15));
        let wrong = TransmissionMap::constant(1, 2, 1.0).unwrap();
        assert!(matches!(synthesize_fog(&j, &wrong, a), Err(crate::Error::Dimension(_))));
    }

    #[test]
    fn invert_identity_and_floor() {
        let j = unit(3, 3, |y, x| [0.1 * y as f64, 0.1 * x as f64, 0.5]);
        let one = TransmissionMap::constant(3, 3, 1.0).unwrap();
        let a = AtmosphericLight::new([0.9, 0.8, 0.7]).unwrap();
        assert_eq!(invert_fog(&j, &one, a, T_FLOOR).unwrap(), j);
        // I = A → (A − A(1 − t'))/t' = A regardless of the floor.
        let i = ImageRGB::filled(3, 3, Range::Unit, a.rgb()).unwrap();
        let tiny = TransmissionMap::constant(3, 3, 1e-4).unwrap();
        let r = invert_fog(&i, &tiny, a, T_FLOOR).unwrap();
        for p in r.pixels().chunks(3) {
            for c in 0..3 {
                assert!((p[c] - a.rgb()[c]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn dark_channel_constant_and_single_bright_pixel() {
        let c = ImageRGB::filled(6, 6, Range::Unit, [0.3, 0.5, 0.7]).unwrap();
        assert_eq!(atmospheric_light_dark_channel(&c, 0.001).rgb(), [0.3, 0.5, 0.7]);

        let img = unit(8, 8, |y, x| if (y, x) == (3, 5) { [1.0, 0.95, 0.9] } else { [0.05, 0.1, 0.02] });
        let got = atmospheric_light_dark_channel(&img, 0.001);
        // Brute force: the 15×15 window covers the whole 8×8 image, so every
        // pixel's dark channel equals the global minimum and all pixels are
        // candidates; the brightest pixel wins.
        let mut best = [0.0; 3];
        for y in 0..8 {
            for x in 0..8 {
                let p = img.pixel(y, x);
                if p.iter().sum::<f64>() > best.iter().sum::<f64>() {
                    best = p;
                }
            }
        }
        assert_eq!(got.rgb(), best);
        assert_eq!(got.rgb(), [1.0, 0.95, 0.9]);
    }

    #[test]
    fn sky_estimates() {
        let img = unit(10, 10, |y, _| if y < 5 { [0.9; 3] } else { [0.2, 0.3, 0.1] });
        let all = [1.0; 100];
        let (a, src) = atmospheric_light_from_sky(&img, &all).unwrap();
        assert_eq!(src, AirlightSource::Sky);
        let means = img.channel_means();
        for c in 0..3 {
            assert!((a.rgb()[c] - means[c]).abs() < 1e-12);
        }
        let half: alloc::vec::Vec<f64> = (0..100).map(|i| if i < 50 { 0.8 } else { 0.1 }).collect();
        let (a, _) = atmospheric_light_from_sky(&img, &half).unwrap();
        assert!(a.rgb().iter().all(|&v| (v - 0.9).abs() < 1e-12));
        let (a, src) = atmospheric_light_from_sky(&img, &[0.0; 100]).unwrap();
        assert_eq!(src, AirlightSource::DarkChannelFallback);
        assert_eq!(a, atmospheric_light_dark_channel(&img, DARK_CHANNEL_TOP_FRACTION));
    }
}
