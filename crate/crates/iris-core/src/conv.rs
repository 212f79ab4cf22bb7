//! Forward signal path of the convolutional layer: toroidal wrap padding,
//! valid 2D convolution, and the sigmoid activation.
//!
//! Wrap padding extends the raster as a torus on both axes, so a "valid"
//! convolution with an odd-sized kernel returns a map of the original shape
//! and sampled bits never land on synthetic border values. The convolution
//! uses the cross-correlation convention (no kernel flip), matching standard
//! network layers; accumulation runs in row-major kernel order so results are
//! identical regardless of thread count.

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::kernel::Kernel;

/// Toroidal border extension:
/// `out[r][c] = img[(r - pad_y) mod H][(c - pad_x) mod W]`.
pub fn wrap_pad(img: &Grid, pad_y: usize, pad_x: usize) -> Result<Grid> {
    let (h, w) = img.dims();
    if pad_y >= h || pad_x >= w {
        return Err(Error::PadTooLarge {
            pad: (pad_y, pad_x),
            dims: (h, w),
        });
    }
    let mut out = Grid::zeros(h + 2 * pad_y, w + 2 * pad_x);
    for r in 0..h + 2 * pad_y {
        let src_r = (r + h - pad_y) % h;
        let src = img.row(src_r);
        let dst = &mut out.values_mut()[r * (w + 2 * pad_x)..(r + 1) * (w + 2 * pad_x)];
        for (c, d) in dst.iter_mut().enumerate() {
            let src_c = (c + w - pad_x) % w;
            *d = src[src_c];
        }
    }
    Ok(out)
}

/// Valid cross-correlation:
/// `out[y][x] = sum_{u,v} padded[y+u][x+v] * kernel[u][v]`.
///
/// Output shape is `(ph - kh + 1) x (pw - kw + 1)`; with `wrap_pad` at the
/// kernel's half-size this recovers the original image shape.
pub fn convolve_valid(padded: &Grid, kernel: &Kernel) -> Result<Grid> {
    let (ph, pw) = padded.dims();
    let (kh, kw) = (kernel.rows(), kernel.cols());
    if ph < kh || pw < kw {
        return Err(Error::ConvShape {
            padded: (ph, pw),
            kernel: (kh, kw),
        });
    }
    let (oh, ow) = (ph - kh + 1, pw - kw + 1);
    let mut out = Grid::zeros(oh, ow);
    for y in 0..oh {
        for x in 0..ow {
            out.set(y, x, response_at(padded, kernel, y, x));
        }
    }
    Ok(out)
}

/// Single output pixel of the valid cross-correlation. Shared by the full map
/// and the sampled fast path so both accumulate in the identical order.
#[inline]
pub fn response_at(padded: &Grid, kernel: &Kernel, y: usize, x: usize) -> f64 {
    let mut acc = 0.0;
    for u in 0..kernel.rows() {
        let prow = &padded.row(y + u)[x..x + kernel.cols()];
        let krow = kernel.row(u);
        for (p, k) in prow.iter().zip(krow) {
            acc += p * k;
        }
    }
    acc
}

/// Logistic sigmoid, 1/(1+exp(-x)). Saturates but never produces NaN for
/// finite input.
#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}
