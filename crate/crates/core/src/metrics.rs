//! Full-reference (PSNR, SSIM) and edge-based no-reference quality metrics.
//! All functions take unit-range images.

use alloc::vec;
use alloc::vec::Vec;

use num_traits::Float;

use crate::error::{bail, Result};
use crate::image::ImageRGB;

pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
pub const SSIM_K1: f64 = 0.01;
pub const SSIM_K2: f64 = 0.03;
/// Visible edges are pixels whose gradient exceeds this fraction of the max.
pub const EDGE_THRESHOLD: f64 = 0.1;
const EDGE_EPS: f64 = 1e-6;

fn check_pair(a: &ImageRGB, b: &ImageRGB) -> Result<()> {
    if !a.same_dims(b) {
        bail!(Dimension, "{}×{} vs {}×{}", a.height(), a.width(), b.height(), b.width());
    }
    Ok(())
}

/// Peak signal-to-noise ratio in dB with peak 1; `f64::INFINITY` for
/// identical images.
pub fn psnr(a: &ImageRGB, b: &ImageRGB) -> Result<f64> {
    check_pair(a, b)?;
    let n = a.pixels().len() as f64;
    let mse = a.pixels().iter().zip(b.pixels()).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / n;
    if mse == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * Float::log10(1.0 / mse))
}

/// Normalized 1-D Gaussian; the 2-D window is its outer product.
pub fn gaussian_kernel(size: usize, sigma: f64) -> Vec<f64> {
    let c = (size as f64 - 1.0) / 2.0;
    let raw: Vec<f64> = (0..size).map(|i| Float::exp(-(i as f64 - c) * (i as f64 - c) / (2.0 * sigma * sigma))).collect();
    let s: f64 = raw.iter().sum();
    raw.into_iter().map(|v| v / s).collect()
}

/// Valid-mode separable filtering of an h×w plane.
fn filter_valid(plane: &[f64], h: usize, w: usize, k: &[f64]) -> Vec<f64> {
    let n = k.len();
    let ow = w - n + 1;
    let oh = h - n + 1;
    let mut rows = vec![0.0; h * ow];
    for y in 0..h {
        for x in 0..ow {
            rows[y * ow + x] = (0..n).map(|i| k[i] * plane[y * w + x + i]).sum();
        }
    }
    let mut out = vec![0.0; oh * ow];
    for y in 0..oh {
        for x in 0..ow {
            out[y * ow + x] = (0..n).map(|i| k[i] * rows[(y + i) * ow + x]).sum();
        }
    }
    out
}

/// Structural similarity of the gray (channel-mean) images with an 11×11
/// Gaussian window (σ = 1.5), averaged over all valid window positions.
pub fn ssim(a: &ImageRGB, b: &ImageRGB) -> Result<f64> {
    check_pair(a, b)?;
    let (h, w) = (a.height(), a.width());
    if h < SSIM_WINDOW || w < SSIM_WINDOW {
        bail!(Geometry, "SSIM needs at least {SSIM_WINDOW}×{SSIM_WINDOW}, got {h}×{w}");
    }
    let ga = a.gray();
    let gb = b.gray();
    let k = gaussian_kernel(SSIM_WINDOW, SSIM_SIGMA);
    let prod = |x: &[f64], y: &[f64]| -> Vec<f64> { x.iter().zip(y).map(|(p, q)| p * q).collect() };
    let mu_a = filter_valid(&ga, h, w, &k);
    let mu_b = filter_valid(&gb, h, w, &k);
    let e_aa = filter_valid(&prod(&ga, &ga), h, w, &k);
    let e_bb = filter_valid(&prod(&gb, &gb), h, w, &k);
    let e_ab = filter_valid(&prod(&ga, &gb), h, w, &k);
    let c1 = SSIM_K1 * SSIM_K1;
    let c2 = SSIM_K2 * SSIM_K2;
    let n = mu_a.len();
    let mut total = 0.0;
    for i in 0..n {
        let (ma, mb) = (mu_a[i], mu_b[i]);
        let va = e_aa[i] - ma * ma;
        let vb = e_bb[i] - mb * mb;
        let cov = e_ab[i] - ma * mb;
        total += ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
    }
    Ok(total / n as f64)
}

/// Sobel gradient magnitude of an h×w plane at interior pixels (borders 0).
pub fn sobel_magnitude(plane: &[f64], h: usize, w: usize) -> Vec<f64> {
    let mut out = vec![0.0; h * w];
    if h < 3 || w < 3 {
        return out;
    }
    let p = |y: usize, x: usize| plane[y * w + x];
    for y in 1..h - 1 {
        for x in 1..w - 1 {
            let gx = (p(y - 1, x + 1) + 2.0 * p(y, x + 1) + p(y + 1, x + 1))
                - (p(y - 1, x - 1) + 2.0 * p(y, x - 1) + p(y + 1, x - 1));
            let gy = (p(y + 1, x - 1) + 2.0 * p(y + 1, x) + p(y + 1, x + 1))
                - (p(y - 1, x - 1) + 2.0 * p(y - 1, x) + p(y - 1, x + 1));
            out[y * w + x] = Float::sqrt(gx * gx + gy * gy);
        }
    }
    out
}

/// Simplified visible-edge gradient ratio.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EdgeRatio {
    pub value: f64,
    /// No visible edges were found; `value` is then the 1.0 sentinel.
    pub empty: bool,
}

/// Mean of `g_defogged / (g_foggy + 1e-6)` over pixels whose defogged Sobel
/// magnitude exceeds 0.1× its maximum.
pub fn edge_gradient_ratio(foggy: &ImageRGB, defogged: &ImageRGB) -> Result<EdgeRatio> {
    check_pair(foggy, defogged)?;
    let (h, w) = (foggy.height(), foggy.width());
    let gf = sobel_magnitude(&foggy.gray(), h, w);
    let gd = sobel_magnitude(&defogged.gray(), h, w);
    let max = gd.iter().copied().fold(0.0, f64::max);
    let threshold = EDGE_THRESHOLD * max;
    let mut sum = 0.0;
    let mut count = 0usize;
    for (d, f) in gd.iter().zip(&gf) {
        if *d > threshold {
            sum += d / (f + EDGE_EPS);
            count += 1;
        }
    }
    if count == 0 {
        return Ok(EdgeRatio { value: 1.0, empty: true });
    }
    Ok(EdgeRatio { value: sum / count as f64, empty: false })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::image::Range;

    fn img(h: usize, w: usize, f: impl Fn(usize, usize) -> f64) -> ImageRGB {
        ImageRGB::from_fn(h, w, Range::Unit, |y, x| [f(y, x); 3]).unwrap()
    }

    #[test]
    fn psnr_cases() {
        let a = img(8, 8, |y, x| (y * 8 + x) as f64 / 128.0);
        let b = img(8, 8, |y, x| (y * 8 + x) as f64 / 128.0 + 0.1);
        assert!((psnr(&a, &b).unwrap() - 20.0).abs() < 1e-9);
        assert_eq!(psnr(&a, &a).unwrap(), f64::INFINITY);
        assert_eq!(psnr(&img(4, 4, |_, _| 0.0), &img(4, 4, |_, _| 1.0)).unwrap(), 0.0);
        assert!(psnr(&a, &img(4, 4, |_, _| 0.0)).is_err());
    }

    #[test]
    fn ssim_identity_and_inversion() {
        let a = img(16, 16, |y, x| ((y * 7 + x * 3) % 11) as f64 / 10.0);
        assert_eq!(ssim(&a, &a).unwrap(), 1.0);
        let inv = img(16, 16, |y, x| 1.0 - ((y * 7 + x * 3) % 11) as f64 / 10.0);
        assert!(ssim(&a, &inv).unwrap() < 1.0);
        assert!(ssim(&img(10, 16, |_, _| 0.5), &img(10, 16, |_, _| 0.5)).is_err());
    }

    #[test]
    fn kernel_is_normalized_and_symmetric() {
        let k = gaussian_kernel(11, 1.5);
        assert!((k.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        for i in 0..11 {
            assert_eq!(k[i], k[10 - i]);
        }
    }

    #[test]
    fn edge_ratio_cases() {
        let a = img(12, 12, |y, x| 0.25 + 0.02 * ((x * x + y) % 9) as f64);
        let same = edge_gradient_ratio(&a, &a).unwrap();
        assert!(!same.empty);
        assert!((same.value - 1.0).abs() < 1e-3);
        let doubled = img(12, 12, |y, x| 2.0 * (0.25 + 0.02 * ((x * x + y) % 9) as f64) - 0.25);
        assert!((edge_gradient_ratio(&a, &doubled).unwrap().value - 2.0).abs() < 1e-3);
        let flat = edge_gradient_ratio(&a, &img(12, 12, |_, _| 0.3)).unwrap();
        assert_eq!(flat, EdgeRatio { value: 1.0, empty: true });
    }
}
