use crate::Real;

/// Geometry of a strided window sweep over a C×H×W image producing an
/// `out_h`×`out_w` grid. Padding on the bottom/right only shows up through
/// `out_h`/`out_w`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) struct Window {
    pub channels: usize,
    pub h: usize,
    pub w: usize,
    pub k: usize,
    pub stride: usize,
    pub pad_top: usize,
    pub pad_left: usize,
    pub out_h: usize,
    pub out_w: usize,
}

impl Window {
    pub fn col_rows(&self) -> usize {
        self.channels * self.k * self.k
    }

    pub fn col_cols(&self) -> usize {
        self.out_h * self.out_w
    }
}

/// Unfolds `img` (C×H×W) into `cols` ((C·K·K)×(OH·OW)).
pub(crate) fn im2col<T: Real>(img: &[T], win: &Window, cols: &mut [T]) {
    let Window { channels, h, w, k, stride, pad_top, pad_left, out_h, out_w } = *win;
    let p = out_h * out_w;
    debug_assert_eq!(cols.len(), channels * k * k * p);
    for c in 0..channels {
        let plane = &img[c * h * w..(c + 1) * h * w];
        for ky in 0..k {
            for kx in 0..k {
                let row = (c * k + ky) * k + kx;
                let dst = &mut cols[row * p..(row + 1) * p];
                for oy in 0..out_h {
                    let iy = (oy * stride + ky) as isize - pad_top as isize;
                    let line = &mut dst[oy * out_w..(oy + 1) * out_w];
                    if iy < 0 || iy >= h as isize {
                        line.fill(T::zero());
                        continue;
                    }
                    let src = &plane[iy as usize * w..(iy as usize + 1) * w];
                    if stride == 1 {
                        for (ox, d) in line.iter_mut().enumerate() {
                            let ix = (ox + kx) as isize - pad_left as isize;
                            *d = if ix < 0 || ix >= w as isize { T::zero() } else { src[ix as usize] };
                        }
                    } else {
                        for (ox, d) in line.iter_mut().enumerate() {
                            let ix = (ox * stride + kx) as isize - pad_left as isize;
                            *d = if ix < 0 || ix >= w as isize { T::zero() } else { src[ix as usize] };
                        }
                    }
                }
            }
        }
    }
}

/// Adjoint of [`im2col`]: scatters `cols` back onto `img`, accumulating.
pub(crate) fn col2im_add<T: Real>(cols: &[T], win: &Window, img: &mut [T]) {
    let Window { channels, h, w, k, stride, pad_top, pad_left, out_h, out_w } = *win;
    let p = out_h * out_w;
    for c in 0..channels {
        let plane = &mut img[c * h * w..(c + 1) * h * w];
        for ky in 0..k {
            for kx in 0..k {
                let row = (c * k + ky) * k + kx;
                let src = &cols[row * p..(row + 1) * p];
                for oy in 0..out_h {
                    let iy = (oy * stride + ky) as isize - pad_top as isize;
                    if iy < 0 || iy >= h as isize {
                        continue;
                    }
                    let dst = &mut plane[iy as usize * w..(iy as usize + 1) * w];
                    let line = &src[oy * out_w..(oy + 1) * out_w];
                    for (ox, &v) in line.iter().enumerate() {
                        let ix = (ox * stride + kx) as isize - pad_left as isize;
                        if ix >= 0 && ix < w as isize {
                            dst[ix as usize] += v;
                        }
                    }
                }
            }
        }
    }
}
