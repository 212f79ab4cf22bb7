//! Intra-class rotation compensation: pick the class image with the highest
//! mean Pearson correlation as reference, then circularly shift every other
//! image along the columns to its best-correlating position.

use rayon::prelude::*;

use crate::grid::Grid;
use crate::image::{NormalizedIris, OcclusionMask};

/// Reference selection and per-image column shifts for one class.
#[derive(Debug, Clone, PartialEq)]
pub struct AlignmentResult {
    pub reference_index: usize,
    /// Circular column shift applied to each image, in [0, width).
    /// `shifts[reference_index]` is always 0.
    pub shifts: Vec<usize>,
}

/// Standard sample Pearson correlation over all pixel pairs.
/// Zero variance in either input is defined as correlation 0.
pub fn pearson_cc(a: &Grid, b: &Grid) -> f64 {
    assert_eq!(a.dims(), b.dims(), "pearson_cc shape mismatch");
    let n = (a.rows() * a.cols()) as f64;
    let mean_a = a.values().iter().sum::<f64>() / n;
    let mean_b = b.values().iter().sum::<f64>() / n;
    let mut num = 0.0;
    let mut var_a = 0.0;
    let mut var_b = 0.0;
    for (x, y) in a.values().iter().zip(b.values()) {
        let dx = x - mean_a;
        let dy = y - mean_b;
        num += dx * dy;
        var_a += dx * dx;
        var_b += dy * dy;
    }
    if var_a == 0.0 || var_b == 0.0 {
        return 0.0;
    }
    num / (var_a.sqrt() * var_b.sqrt())
}

/// Precomputed statistics for correlating one image against many shifts.
struct CenteredRef {
    centered: Grid,
    centered_sum: f64,
    norm: f64,
}

impl CenteredRef {
    fn new(g: &Grid) -> Self {
        let mean = g.mean();
        let centered = Grid::from_fn(g.rows(), g.cols(), |r, c| g.get(r, c) - mean);
        let centered_sum = centered.values().iter().sum::<f64>();
        let norm = centered.values().iter().map(|v| v * v).sum::<f64>().sqrt();
        CenteredRef {
            centered,
            centered_sum,
            norm,
        }
    }
}

/// PCC between `img` circularly shifted right by `shift` columns and the
/// reference, without materializing the shifted copy.
fn pcc_at_shift(img: &Grid, img_mean: f64, img_norm: f64, rf: &CenteredRef, shift: usize) -> f64 {
    if img_norm == 0.0 || rf.norm == 0.0 {
        return 0.0;
    }
    let w = img.cols();
    let mut cross = 0.0;
    for r in 0..img.rows() {
        let src = img.row(r);
        let refr = rf.centered.row(r);
        // shifted[c] = src[(c - shift) mod w], accumulated in output order
        for c in 0..shift {
            cross += src[c + w - shift] * refr[c];
        }
        for c in shift..w {
            cross += src[c - shift] * refr[c];
        }
    }
    (cross - img_mean * rf.centered_sum) / (img_norm * rf.norm)
}

/// Best shift in [0, width) maximizing correlation with the reference;
/// ties break toward the smallest shift value.
fn best_shift(img: &Grid, rf: &CenteredRef) -> usize {
    let mean = img.mean();
    let norm = img
        .values()
        .iter()
        .map(|v| {
            let d = v - mean;
            d * d
        })
        .sum::<f64>()
        .sqrt();
    let mut best = 0usize;
    let mut best_pcc = f64::NEG_INFINITY;
    for s in 0..img.cols() {
        let pcc = pcc_at_shift(img, mean, norm, rf, s);
        if pcc > best_pcc {
            best_pcc = pcc;
            best = s;
        }
    }
    best
}

/// Align a class: returns the alignment plus shifted copies of images and
/// masks. Masks move by the same shifts as their images.
pub fn align_class(
    images: &[NormalizedIris],
    masks: &[OcclusionMask],
) -> (AlignmentResult, Vec<NormalizedIris>, Vec<OcclusionMask>) {
    assert!(!images.is_empty(), "align_class needs at least one image");
    assert_eq!(images.len(), masks.len());
    let k = images.len();

    // reference = image with highest mean PCC against the others of the class
    let reference_index = if k == 1 {
        0
    } else {
        let mut pcc = vec![vec![0.0; k]; k];
        let upper: Vec<(usize, usize)> = (0..k)
            .flat_map(|i| (i + 1..k).map(move |j| (i, j)))
            .collect();
        let vals: Vec<f64> = upper
            .par_iter()
            .map(|&(i, j)| pearson_cc(images[i].grid(), images[j].grid()))
            .collect();
        for (&(i, j), v) in upper.iter().zip(&vals) {
            pcc[i][j] = *v;
            pcc[j][i] = *v;
        }
        let mut best = 0usize;
        let mut best_mean = f64::NEG_INFINITY;
        for (i, row) in pcc.iter().enumerate() {
            let mean = (row.iter().sum::<f64>() - row[i]) / (k - 1) as f64;
            if mean > best_mean {
                best_mean = mean;
                best = i;
            }
        }
        best
    };

    let rf = CenteredRef::new(images[reference_index].grid());
    let shifts: Vec<usize> = images
        .par_iter()
        .enumerate()
        .map(|(i, img)| {
            if i == reference_index {
                0
            } else {
                best_shift(img.grid(), &rf)
            }
        })
        .collect();

    let shifted_images: Vec<NormalizedIris> = images
        .iter()
        .zip(&shifts)
        .map(|(img, &s)| img.shift_cols(s as i64))
        .collect();
    let shifted_masks: Vec<OcclusionMask> = masks
        .iter()
        .zip(&shifts)
        .map(|(m, &s)| m.shift_cols(s as i64))
        .collect();

    (
        AlignmentResult {
            reference_index,
            shifts,
        },
        shifted_images,
        shifted_masks,
    )
}
