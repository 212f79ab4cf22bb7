//! Per-kernel sampling coordinates used by the training machinery.
//!
//! Training, gradient checks, and mining all run through this type rather
//! than [`SamplingMap`] so the same code paths work on downscaled instances
//! (small images, few kernels, few points) during verification.

use crate::error::Result;
use crate::grid::Grid;
use crate::image::OcclusionMask;
use crate::kernel::Kernel;
use crate::sampling::{Point, SamplingMap, MAP_COUNT};

/// One coordinate list per kernel map.
#[derive(Debug, Clone)]
pub struct TrainPoints {
    lists: Vec<Vec<Point>>,
}

impl TrainPoints {
    /// Free-form lists; lengths may differ from the production 6x256 layout.
    pub fn new(lists: Vec<Vec<Point>>) -> Self {
        assert!(!lists.is_empty());
        let len = lists[0].len();
        assert!(lists.iter().all(|l| l.len() == len), "uneven point lists");
        TrainPoints { lists }
    }

    pub fn from_map(map: &SamplingMap) -> Self {
        let lists = (0..MAP_COUNT).map(|k| map.map_points(k).to_vec()).collect();
        TrainPoints { lists }
    }

    pub fn maps(&self) -> usize {
        self.lists.len()
    }

    pub fn per_map(&self) -> usize {
        self.lists[0].len()
    }

    pub fn total(&self) -> usize {
        self.maps() * self.per_map()
    }

    #[inline]
    pub fn points(&self, k: usize) -> &[Point] {
        &self.lists[k]
    }

    /// Sampled sigmoid features of an image, map-major. Identical arithmetic
    /// to the full pad-convolve-sigmoid-index pipeline.
    pub fn features(&self, img: &Grid, kernels: &[Kernel]) -> Result<Vec<f64>> {
        assert_eq!(kernels.len(), self.maps());
        let padded = crate::coder::PaddedImage::new(img, kernels)?;
        let mut out = Vec::with_capacity(self.total());
        for (ki, kernel) in kernels.iter().enumerate() {
            let grid = padded.for_kernel(ki);
            for &(r, c) in self.points(ki) {
                out.push(crate::conv::sigmoid(crate::conv::response_at(
                    grid, kernel, r, c,
                )));
            }
        }
        Ok(out)
    }

    /// Sampled AND of two full-size masks, map-major.
    pub fn sampled_combined(&self, a: &OcclusionMask, b: &OcclusionMask) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.total());
        for k in 0..self.maps() {
            for &(r, c) in self.points(k) {
                out.push(a.get(r, c) & b.get(r, c));
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::image::{IRIS_COLS, IRIS_ROWS};
    use crate::kernel::KernelBank;
    use crate::rng::Stream;

    #[test]
    fn matches_coder_paths_on_full_size_inputs() {
        let mut s = Stream::new(44);
        let img = Grid::from_fn(IRIS_ROWS, IRIS_COLS, |_, _| s.next_f64());
        let iris = crate::image::NormalizedIris::new(img.clone()).unwrap();
        let bank = KernelBank::random_init(2, &crate::kernel::DEFAULT_SIZES).unwrap();
        let map = SamplingMap::default_grid();
        let tp = TrainPoints::from_map(&map);

        let a = tp.features(&img, bank.kernels()).unwrap();
        let b = crate::coder::encode_features(&iris, &bank, &map).unwrap();
        assert_eq!(a, b.values());

        let bits_a: Vec<u8> = (0..IRIS_ROWS * IRIS_COLS)
            .map(|i| ((i / 7) % 2) as u8)
            .collect();
        let bits_b: Vec<u8> = (0..IRIS_ROWS * IRIS_COLS)
            .map(|i| ((i / 11) % 2) as u8)
            .collect();
        let ma = OcclusionMask::new(IRIS_ROWS, IRIS_COLS, bits_a).unwrap();
        let mb = OcclusionMask::new(IRIS_ROWS, IRIS_COLS, bits_b).unwrap();
        assert_eq!(
            tp.sampled_combined(&ma, &mb),
            crate::coder::sampled_combined_mask(&ma, &mb, &map)
        );
    }
}
