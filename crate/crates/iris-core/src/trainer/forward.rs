//! Triplet forward pass and the hand-derived backward pass.
//!
//! The chain runs loss -> masked distance -> sigmoid feature -> sampled
//! convolution response -> kernel weight:
//!
//! * dLoss/d(d_ap) =  c,  dLoss/d(d_an) = -c, with c the loss coefficient
//!   (sigmoid(d_ap - d_an) for soft margin);
//! * dd/df_x(i) = sign(f_x(i) - f_y(i)) * m(i) / sum(m), with sign(0) = 0;
//! * df/dresponse = f (1 - f);
//! * dresponse(r,c)/dw(u,v) = padded_input(r+u, c+v).
//!
//! Contributions accumulate over the sampled points of each map, over both
//! distances, and over all three images; the anchor appears in both d_ap and
//! d_an. Accumulation order is fixed, so results never depend on threading.

use crate::coder::PaddedImage;
use crate::conv::{response_at, sigmoid};
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::kernel::Kernel;
use crate::trainer::loss::LossKind;
use crate::trainer::points::TrainPoints;

/// Borrowed triplet inputs: three images plus the sampled combined masks of
/// the anchor/positive and anchor/negative pairs (map-major, one bit per
/// sampled feature).
pub struct TripletData<'a> {
    pub anchor: &'a Grid,
    pub positive: &'a Grid,
    pub negative: &'a Grid,
    pub ap_mask: &'a [u8],
    pub an_mask: &'a [u8],
}

/// Cached activations from a forward pass, consumed by the backward pass.
pub struct ForwardPass {
    pub d_ap: f64,
    pub d_an: f64,
    pub loss: f64,
    features: [Vec<f64>; 3],
    padded: [PaddedImage; 3],
    mask_sums: [f64; 2],
}

/// Per-kernel weight gradients, shapes matching the bank.
#[derive(Debug, Clone)]
pub struct GradientSet {
    grads: Vec<Vec<f64>>,
}

impl GradientSet {
    pub fn zeros_like(kernels: &[Kernel]) -> Self {
        GradientSet {
            grads: kernels.iter().map(|k| vec![0.0; k.weights().len()]).collect(),
        }
    }

    pub fn kernel(&self, k: usize) -> &[f64] {
        &self.grads[k]
    }

    pub fn kernel_mut(&mut self, k: usize) -> &mut [f64] {
        &mut self.grads[k]
    }

    pub fn kernel_count(&self) -> usize {
        self.grads.len()
    }

    pub fn add_assign(&mut self, other: &GradientSet) {
        for (a, b) in self.grads.iter_mut().zip(&other.grads) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for g in &mut self.grads {
            for x in g.iter_mut() {
                *x *= factor;
            }
        }
    }

    /// First non-finite entry, if any, as (kernel, weight index).
    pub fn find_non_finite(&self) -> Option<(usize, usize)> {
        for (k, g) in self.grads.iter().enumerate() {
            if let Some(i) = g.iter().position(|x| !x.is_finite()) {
                return Some((k, i));
            }
        }
        None
    }
}

fn masked_mean_abs_diff(fa: &[f64], fb: &[f64], mask: &[u8]) -> (f64, f64) {
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..fa.len() {
        let m = f64::from(mask[i]);
        num += (fa[i] - fb[i]).abs() * m;
        den += m;
    }
    (num, den)
}

/// Encode the three images with the shared bank and compute the two masked
/// distances and the loss. Errors with [`Error::DegenerateTriplet`] when a
/// combined sampled mask has no set bits.
pub fn triplet_forward(
    kernels: &[Kernel],
    points: &TrainPoints,
    t: &TripletData,
    loss: LossKind,
) -> Result<ForwardPass> {
    let total = points.total();
    assert_eq!(t.ap_mask.len(), total);
    assert_eq!(t.an_mask.len(), total);

    let padded = [
        PaddedImage::new(t.anchor, kernels)?,
        PaddedImage::new(t.positive, kernels)?,
        PaddedImage::new(t.negative, kernels)?,
    ];
    let mut features: [Vec<f64>; 3] = [Vec::new(), Vec::new(), Vec::new()];
    for (img, feats) in padded.iter().zip(features.iter_mut()) {
        let mut out = Vec::with_capacity(total);
        for (ki, kernel) in kernels.iter().enumerate() {
            let grid = img.for_kernel(ki);
            for &(r, c) in points.points(ki) {
                out.push(sigmoid(response_at(grid, kernel, r, c)));
            }
        }
        *feats = out;
    }

    let (ap_num, ap_den) = masked_mean_abs_diff(&features[0], &features[1], t.ap_mask);
    let (an_num, an_den) = masked_mean_abs_diff(&features[0], &features[2], t.an_mask);
    if ap_den == 0.0 || an_den == 0.0 {
        return Err(Error::DegenerateTriplet);
    }
    let d_ap = ap_num / ap_den;
    let d_an = an_num / an_den;

    Ok(ForwardPass {
        d_ap,
        d_an,
        loss: loss.value(d_ap, d_an),
        features,
        padded,
        mask_sums: [ap_den, an_den],
    })
}

#[inline]
fn abs_sign(diff: f64) -> f64 {
    if diff > 0.0 {
        1.0
    } else if diff < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Exact analytic gradient of the triplet loss with respect to every kernel
/// weight, accumulated in a fixed order (distance, map, point).
pub fn triplet_backward(
    kernels: &[Kernel],
    points: &TrainPoints,
    t: &TripletData,
    fwd: &ForwardPass,
    loss: LossKind,
) -> GradientSet {
    let mut grads = GradientSet::zeros_like(kernels);
    let coeff = loss.coefficient(fwd.d_ap, fwd.d_an);
    if coeff == 0.0 {
        return grads; // hinge fully clamped
    }

    // (distance coefficient, image x, image y, mask, mask sum):
    // x contributes +sign(f_x - f_y), y the negated term
    let routes: [(f64, usize, usize, &[u8], f64); 2] = [
        (coeff, 0, 1, t.ap_mask, fwd.mask_sums[0]),
        (-coeff, 0, 2, t.an_mask, fwd.mask_sums[1]),
    ];

    for &(c_dist, xi, yi, mask, msum) in &routes {
        let fx = &fwd.features[xi];
        let fy = &fwd.features[yi];
        let px = &fwd.padded[xi];
        let py = &fwd.padded[yi];
        let inv_m = 1.0 / msum;
        let mut offset = 0usize;
        for (ki, kernel) in kernels.iter().enumerate() {
            let grad = grads.kernel_mut(ki);
            let gx = px.for_kernel(ki);
            let gy = py.for_kernel(ki);
            let (kh, kw) = (kernel.rows(), kernel.cols());
            for (pi, &(r, c)) in points.points(ki).iter().enumerate() {
                let i = offset + pi;
                if mask[i] == 0 {
                    continue;
                }
                let s = abs_sign(fx[i] - fy[i]);
                if s == 0.0 {
                    continue;
                }
                let base = c_dist * s * inv_m;
                let cx = base * fx[i] * (1.0 - fx[i]);
                let cy = -base * fy[i] * (1.0 - fy[i]);
                for u in 0..kh {
                    let rowx = &gx.row(r + u)[c..c + kw];
                    let rowy = &gy.row(r + u)[c..c + kw];
                    let grow = &mut grad[u * kw..(u + 1) * kw];
                    for v in 0..kw {
                        grow[v] += cx * rowx[v] + cy * rowy[v];
                    }
                }
            }
            offset += points.per_map();
        }
    }
    grads
}
