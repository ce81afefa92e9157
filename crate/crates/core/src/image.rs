//! RGB rasters and their bridge to network tensors.

use num_traits::Float;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{bail, Result};
use crate::{Real, Tensor};

/// Value domain of an [`ImageRGB`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Range {
    /// `[0, 1]`
    Unit,
    /// `[-1, 1]`, the domain networks consume and produce.
    Signed,
}

/// Height×width×3 raster, interleaved RGB.
#[derive(Clone, Debug, PartialEq)]
pub struct ImageRGB {
    height: usize,
    width: usize,
    range: Range,
    pixels: Vec<f64>,
}

impl ImageRGB {
    pub fn new(height: usize, width: usize, range: Range, pixels: Vec<f64>) -> Result<Self> {
        if height == 0 || width == 0 {
            bail!(Dimension, "image must be at least 1x1, got {}x{}", height, width);
        }
        if pixels.len() != height * width * 3 {
            bail!(Dimension, "{}x{} RGB image needs {} values, got {}", height, width, height * width * 3, pixels.len());
        }
        Ok(Self { height, width, range, pixels })
    }

    pub fn filled(height: usize, width: usize, range: Range, rgb: [f64; 3]) -> Result<Self> {
        let pixels = (0..height * width).flat_map(|_| rgb).collect();
        Self::new(height, width, range, pixels)
    }

    pub fn from_fn(height: usize, width: usize, range: Range, mut f: impl FnMut(usize, usize) -> [f64; 3]) -> Result<Self> {
        let mut pixels = Vec::with_capacity(height * width * 3);
        for y in 0..height {
            for x in 0..width {
                pixels.extend_from_slice(&f(y, x));
            }
        }
        Self::new(height, width, range, pixels)
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn range(&self) -> Range {
        self.range
    }

    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    pub fn pixels_mut(&mut self) -> &mut [f64] {
        &mut self.pixels
    }

    pub fn pixel(&self, y: usize, x: usize) -> [f64; 3] {
        let i = (y * self.width + x) * 3;
        [self.pixels[i], self.pixels[i + 1], self.pixels[i + 2]]
    }

    pub fn set_pixel(&mut self, y: usize, x: usize, rgb: [f64; 3]) {
        let i = (y * self.width + x) * 3;
        self.pixels[i..i + 3].copy_from_slice(&rgb);
    }

    pub fn same_dims(&self, other: &ImageRGB) -> bool {
        self.height == other.height && self.width == other.width
    }

    /// Per-pixel mean of the three channels.
    pub fn gray(&self) -> Vec<f64> {
        self.pixels.chunks_exact(3).map(|p| (p[0] + p[1] + p[2]) / 3.0).collect()
    }

    /// Mean of each channel.
    pub fn channel_means(&self) -> [f64; 3] {
        let mut sums = [0.0; 3];
        for p in self.pixels.chunks_exact(3) {
            for c in 0..3 {
                sums[c] += p[c];
            }
        }
        let n = (self.height * self.width) as f64;
        sums.map(|s| s / n)
    }

    /// Whether every component lies inside the declared range.
    pub fn in_range(&self) -> bool {
        let lo = match self.range {
            Range::Unit => 0.0,
            Range::Signed => -1.0,
        };
        self.pixels.iter().all(|&v| (lo..=1.0).contains(&v))
    }

    pub fn clamped(mut self) -> Self {
        let lo = match self.range {
            Range::Unit => 0.0,
            Range::Signed => -1.0,
        };
        self.pixels.iter_mut().for_each(|v| *v = v.clamp(lo, 1.0));
        self
    }

    /// `x ↦ 2x − 1`.
    pub fn to_signed(&self) -> Result<Self> {
        if self.range != Range::Unit {
            bail!(Contract, "to_signed expects a unit-range image");
        }
        let pixels = self.pixels.iter().map(|&v| 2.0 * v - 1.0).collect();
        Ok(Self { pixels, range: Range::Signed, ..*self })
    }

    /// `x ↦ (x + 1) / 2`.
    pub fn to_unit(&self) -> Result<Self> {
        if self.range != Range::Signed {
            bail!(Contract, "to_unit expects a signed-range image");
        }
        let pixels = self.pixels.iter().map(|&v| (v + 1.0) / 2.0).collect();
        Ok(Self { pixels, range: Range::Unit, ..*self })
    }

    /// Bilinear resampling with half-pixel centres (corners not aligned).
    pub fn resize(&self, target_h: usize, target_w: usize) -> Result<Self> {
        if target_h == 0 || target_w == 0 {
            bail!(Dimension, "resize target must be at least 1x1");
        }
        if target_h == self.height && target_w == self.width {
            return Ok(self.clone());
        }
        let ys: Vec<(usize, usize, f64)> = (0..target_h).map(|y| sample_axis(y, self.height, target_h)).collect();
        let xs: Vec<(usize, usize, f64)> = (0..target_w).map(|x| sample_axis(x, self.width, target_w)).collect();
        let mut pixels = vec![0.0; target_h * target_w * 3];
        for (ty, &(y0, y1, fy)) in ys.iter().enumerate() {
            for (tx, &(x0, x1, fx)) in xs.iter().enumerate() {
                let (p00, p01, p10, p11) = (self.pixel(y0, x0), self.pixel(y0, x1), self.pixel(y1, x0), self.pixel(y1, x1));
                for c in 0..3 {
                    let top = p00[c] + (p01[c] - p00[c]) * fx;
                    let bottom = p10[c] + (p11[c] - p10[c]) * fx;
                    pixels[(ty * target_w + tx) * 3 + c] = top + (bottom - top) * fy;
                }
            }
        }
        Self::new(target_h, target_w, self.range, pixels)
    }

    /// 1×3×H×W planar tensor.
    pub fn to_tensor<T: Real>(&self) -> Tensor<T> {
        let plane = self.height * self.width;
        let mut data = vec![T::zero(); 3 * plane];
        for (i, p) in self.pixels.chunks_exact(3).enumerate() {
            for c in 0..3 {
                data[c * plane + i] = T::lit(p[c]);
            }
        }
        Tensor::new(&[1, 3, self.height, self.width], data).expect("consistent dims")
    }

    /// Reads batch item `index` of an N×3×H×W tensor.
    pub fn from_tensor<T: Real>(t: &Tensor<T>, index: usize, range: Range) -> Result<Self> {
        let (n, c, h, w) = t.dims4()?;
        if c != 3 || index >= n {
            bail!(Dimension, "cannot read RGB item {} from tensor {:?}", index, t.shape());
        }
        let plane = h * w;
        let d = &t.data()[index * 3 * plane..(index + 1) * 3 * plane];
        let mut pixels = Vec::with_capacity(3 * plane);
        for i in 0..plane {
            for ch in 0..3 {
                pixels.push(d[ch * plane + i].as_f64());
            }
        }
        Self::new(h, w, range, pixels)
    }
}

/// Source taps and weight for destination index `dst` when mapping `src_len`
/// samples onto `dst_len`.
fn sample_axis(dst: usize, src_len: usize, dst_len: usize) -> (usize, usize, f64) {
    let scale = src_len as f64 / dst_len as f64;
    let pos = ((dst as f64 + 0.5) * scale - 0.5).clamp(0.0, (src_len - 1) as f64);
    let i0 = Float::floor(pos) as usize;
    let i1 = (i0 + 1).min(src_len - 1);
    (i0, i1, pos - i0 as f64)
}
