//! Row-major 2D array of f64 used for images, padded inputs, and response maps.

use crate::error::{Error, Result};

/// Dense row-major grid of f64 values.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Grid {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Grid {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols, "grid data length mismatch");
        Grid { rows, cols, data }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Grid { rows, cols, data }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn values(&self) -> &[f64] {
        &self.data
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// Circularly shift columns to the right by `shift`:
    /// `out[r][c] = self[r][(c - shift) mod cols]`.
    pub fn shift_cols(&self, shift: i64) -> Grid {
        let w = self.cols as i64;
        let s = shift.rem_euclid(w) as usize;
        if s == 0 {
            return self.clone();
        }
        let mut out = Grid::zeros(self.rows, self.cols);
        for r in 0..self.rows {
            let src = self.row(r);
            let dst = &mut out.data[r * self.cols..(r + 1) * self.cols];
            dst[s..].copy_from_slice(&src[..self.cols - s]);
            dst[..s].copy_from_slice(&src[self.cols - s..]);
        }
        out
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }

    pub fn expect_dims(&self, what: &str, rows: usize, cols: usize) -> Result<()> {
        if self.rows != rows || self.cols != cols {
            return Err(Error::Dimension {
                what: what.to_string(),
                expected: (rows, cols),
                actual: (self.rows, self.cols),
            });
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shift_cols_is_circular() {
        let g = Grid::from_fn(2, 4, |r, c| (r * 4 + c) as f64);
        let s = g.shift_cols(1);
        // out[r][c] = g[r][(c-1) mod 4]
        assert_eq!(s.row(0), &[3.0, 0.0, 1.0, 2.0]);
        assert_eq!(s.row(1), &[7.0, 4.0, 5.0, 6.0]);
        // full revolution is identity
        assert_eq!(g.shift_cols(4), g);
        // negative shifts wrap
        assert_eq!(g.shift_cols(-1), g.shift_cols(3));
    }

    #[test]
    fn shift_preserves_row_multiset() {
        let g = Grid::from_fn(3, 8, |r, c| ((r * 31 + c * 7) % 13) as f64);
        let s = g.shift_cols(5);
        for r in 0..3 {
            let mut a: Vec<f64> = g.row(r).to_vec();
            let mut b: Vec<f64> = s.row(r).to_vec();
            a.sort_by(f64::total_cmp);
            b.sort_by(f64::total_cmp);
            assert_eq!(a, b);
        }
    }
}
