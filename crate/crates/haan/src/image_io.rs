//! 8-bit PNG reading and writing for [`ImageRGB`].

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};

use haan_core::image::{ImageRGB, Range};

use crate::error::{HaanError, Result};

fn png_err(path: &Path, reason: impl ToString) -> HaanError {
    HaanError::Png { path: path.to_path_buf(), reason: reason.to_string() }
}

/// Maps a unit value to a byte, rounding half up.
pub fn quantize(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0 + 0.5).floor() as u8
}

pub fn dequantize(b: u8) -> f64 {
    f64::from(b) / 255.0
}

/// Decodes any 8- or 16-bit PNG into a unit-range RGB image. Gray images are
/// replicated across channels; alpha is dropped.
pub fn read_png(path: &Path) -> Result<ImageRGB> {
    let file = File::open(path).map_err(|e| HaanError::io(path, e))?;
    let mut decoder = png::Decoder::new(BufReader::new(file));
    decoder.set_transformations(png::Transformations::normalize_to_color8());
    let mut reader = decoder.read_info().map_err(|e| png_err(path, e))?;
    let mut buf = vec![0; reader.output_buffer_size()];
    let info = reader.next_frame(&mut buf).map_err(|e| png_err(path, e))?;
    let (w, h) = (info.width as usize, info.height as usize);
    let channels = info.color_type.samples();
    let bytes = &buf[..info.buffer_size()];
    let mut pixels = Vec::with_capacity(w * h * 3);
    for px in bytes.chunks_exact(channels) {
        match channels {
            1 | 2 => pixels.extend([dequantize(px[0]); 3]),
            3 | 4 => pixels.extend(px[..3].iter().map(|&b| dequantize(b))),
            n => return Err(png_err(path, format!("unsupported channel count {n}"))),
        }
    }
    Ok(ImageRGB::new(h, w, Range::Unit, pixels)?)
}

fn encoder_for(path: &Path, w: usize, h: usize, color: png::ColorType) -> Result<png::Writer<BufWriter<File>>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| HaanError::io(dir, e))?;
    }
    let file = File::create(path).map_err(|e| HaanError::io(path, e))?;
    let mut enc = png::Encoder::new(BufWriter::new(file), w as u32, h as u32);
    enc.set_color(color);
    enc.set_depth(png::BitDepth::Eight);
    enc.write_header().map_err(|e| png_err(path, e))
}

/// Writes an RGB PNG; signed images are mapped to unit range first.
pub fn write_png(path: &Path, image: &ImageRGB) -> Result<()> {
    let unit = match image.range() {
        Range::Unit => image.clone(),
        Range::Signed => image.to_unit()?,
    };
    let bytes: Vec<u8> = unit.pixels().iter().map(|&v| quantize(v)).collect();
    let mut w = encoder_for(path, unit.width(), unit.height(), png::ColorType::Rgb)?;
    w.write_image_data(&bytes).map_err(|e| png_err(path, e))?;
    w.finish().map_err(|e| png_err(path, e))
}

/// Writes a single-channel PNG from unit values in row-major order.
pub fn write_gray_png(path: &Path, values: &[f64], height: usize, width: usize) -> Result<()> {
    let bytes: Vec<u8> = values.iter().map(|&v| quantize(v)).collect();
    let mut w = encoder_for(path, width, height, png::ColorType::Grayscale)?;
    w.write_image_data(&bytes).map_err(|e| png_err(path, e))?;
    w.finish().map_err(|e| png_err(path, e))
}

/// PNG files directly inside `dir`, sorted by file name.
pub fn list_pngs(dir: &Path) -> Result<Vec<PathBuf>> {
    let entries = std::fs::read_dir(dir).map_err(|e| HaanError::io(dir, e))?;
    let mut out = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| HaanError::io(dir, e))?.path();
        let is_png = path.extension().and_then(|e| e.to_str()).is_some_and(|e| e.eq_ignore_ascii_case("png"));
        if is_png && path.is_file() {
            out.push(path);
        }
    }
    out.sort();
    Ok(out)
}

/// File stem as UTF-8 (lossy).
pub fn stem(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

/// Largest size not above `n` divisible by `by` (at least `by`).
pub fn floor_multiple(n: usize, by: usize) -> usize {
    (n / by).max(1) * by
}

/// Resizes so both sides are multiples of `by`; a no-op when they already are.
pub fn fit_multiple(image: &ImageRGB, by: usize) -> Result<ImageRGB> {
    let (h, w) = (floor_multiple(image.height(), by), floor_multiple(image.width(), by));
    Ok(image.resize(h, w)?)
}
