//! Normalized iris images and occlusion masks.
//!
//! Both are fixed at 64 rows (radius) by 512 columns (angle), the standard
//! unwrapped-iris raster. Pixel intensities live in [0,1]; mask bits are 1
//! where the pixel carries genuine iris texture and 0 where it is occluded.

use crate::error::{Error, Result};
use crate::grid::Grid;

pub const IRIS_ROWS: usize = 64;
pub const IRIS_COLS: usize = 512;

/// A 64x512 normalized iris texture with intensities in [0,1].
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedIris {
    grid: Grid,
}

impl NormalizedIris {
    pub fn new(grid: Grid) -> Result<Self> {
        grid.expect_dims("normalized iris", IRIS_ROWS, IRIS_COLS)?;
        if let Some(v) = grid.values().iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::InvalidArgument(format!(
                "iris pixel {} outside [0,1]",
                v
            )));
        }
        Ok(NormalizedIris { grid })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn shift_cols(&self, shift: i64) -> NormalizedIris {
        NormalizedIris {
            grid: self.grid.shift_cols(shift),
        }
    }
}

/// A 64x512 binary occlusion mask; 1 = valid iris pixel, 0 = occluded.
#[derive(Debug, Clone, PartialEq)]
pub struct OcclusionMask {
    rows: usize,
    cols: usize,
    bits: Vec<u8>,
}

impl OcclusionMask {
    pub fn new(rows: usize, cols: usize, bits: Vec<u8>) -> Result<Self> {
        if rows != IRIS_ROWS || cols != IRIS_COLS {
            return Err(Error::Dimension {
                what: "occlusion mask".to_string(),
                expected: (IRIS_ROWS, IRIS_COLS),
                actual: (rows, cols),
            });
        }
        if bits.len() != rows * cols {
            return Err(Error::InvalidArgument("mask bit count mismatch".into()));
        }
        if bits.iter().any(|b| *b > 1) {
            return Err(Error::InvalidArgument("mask values must be 0 or 1".into()));
        }
        Ok(OcclusionMask { rows, cols, bits })
    }

    pub fn all_valid() -> Self {
        OcclusionMask {
            rows: IRIS_ROWS,
            cols: IRIS_COLS,
            bits: vec![1; IRIS_ROWS * IRIS_COLS],
        }
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> u8 {
        self.bits[r * self.cols + c]
    }

    pub fn bits(&self) -> &[u8] {
        &self.bits
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    /// Fraction of pixels marked valid.
    pub fn coverage(&self) -> f64 {
        self.bits.iter().map(|&b| b as u64).sum::<u64>() as f64 / self.bits.len() as f64
    }

    pub fn shift_cols(&self, shift: i64) -> OcclusionMask {
        let w = self.cols as i64;
        let s = shift.rem_euclid(w) as usize;
        if s == 0 {
            return self.clone();
        }
        let mut bits = vec![0u8; self.bits.len()];
        for r in 0..self.rows {
            let src = &self.bits[r * self.cols..(r + 1) * self.cols];
            let dst = &mut bits[r * self.cols..(r + 1) * self.cols];
            dst[s..].copy_from_slice(&src[..self.cols - s]);
            dst[..s].copy_from_slice(&src[self.cols - s..]);
        }
        OcclusionMask {
            rows: self.rows,
            cols: self.cols,
            bits,
        }
    }
}

/// Elementwise AND of two masks: a pixel is valid only if valid in both.
pub fn combine_masks(m1: &OcclusionMask, m2: &OcclusionMask) -> OcclusionMask {
    debug_assert_eq!((m1.rows, m1.cols), (m2.rows, m2.cols));
    let bits = m1
        .bits
        .iter()
        .zip(&m2.bits)
        .map(|(a, b)| a & b)
        .collect();
    OcclusionMask {
        rows: m1.rows,
        cols: m1.cols,
        bits,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mask_from_fn(f: impl Fn(usize, usize) -> u8) -> OcclusionMask {
        let mut bits = Vec::with_capacity(IRIS_ROWS * IRIS_COLS);
        for r in 0..IRIS_ROWS {
            for c in 0..IRIS_COLS {
                bits.push(f(r, c));
            }
        }
        OcclusionMask::new(IRIS_ROWS, IRIS_COLS, bits).unwrap()
    }

    #[test]
    fn iris_rejects_wrong_shape() {
        let g = Grid::zeros(60, 512);
        assert!(matches!(
            NormalizedIris::new(g),
            Err(Error::Dimension { .. })
        ));
    }

    #[test]
    fn iris_rejects_out_of_range_pixels() {
        let mut g = Grid::zeros(IRIS_ROWS, IRIS_COLS);
        g.set(0, 0, 1.5);
        assert!(NormalizedIris::new(g).is_err());
    }

    #[test]
    fn combine_identity_and_absorbing() {
        let m = mask_from_fn(|r, c| ((r + c) % 3 == 0) as u8);
        let ones = OcclusionMask::all_valid();
        let zeros = mask_from_fn(|_, _| 0);
        assert_eq!(combine_masks(&m, &ones), m);
        assert_eq!(combine_masks(&m, &zeros).bits(), zeros.bits());
    }

    #[test]
    fn combine_is_commutative() {
        let a = mask_from_fn(|r, c| ((r * 7 + c) % 2) as u8);
        let b = mask_from_fn(|r, c| ((r + c * 5) % 3 != 1) as u8);
        assert_eq!(combine_masks(&a, &b), combine_masks(&b, &a));
    }

    #[test]
    fn mask_rejects_non_binary() {
        let mut bits = vec![0u8; IRIS_ROWS * IRIS_COLS];
        bits[10] = 2;
        assert!(OcclusionMask::new(IRIS_ROWS, IRIS_COLS, bits).is_err());
    }
}
