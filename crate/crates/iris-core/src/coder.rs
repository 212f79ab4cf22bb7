//! Feature and code production: run the kernel bank over an image, sample the
//! response maps at the fixed coordinates, and binarize.
//!
//! The sampled encoder computes responses only at the sampled coordinates.
//! Each sampled response accumulates in the same row-major kernel order as
//! the full convolution, so the result is bit-identical to building complete
//! response maps and indexing them.

use std::fs;
use std::path::Path;

use crate::conv::{response_at, sigmoid, wrap_pad};
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::image::{NormalizedIris, OcclusionMask};
use crate::kernel::{Kernel, KernelBank};
use crate::sampling::{SamplingMap, CODE_LEN, MAP_COUNT};

/// 1536 real-valued features in (0,1), map-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    values: Vec<f64>,
}

impl FeatureVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.len() != CODE_LEN {
            return Err(Error::InvalidArgument(format!(
                "feature vector must have {} values, got {}",
                CODE_LEN,
                values.len()
            )));
        }
        if values.iter().any(|v| !(*v > 0.0 && *v < 1.0)) {
            return Err(Error::InvalidArgument(
                "feature values must lie strictly in (0,1)".into(),
            ));
        }
        Ok(FeatureVector { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Binary iris code: 1536 response-sign bits plus 1536 sampled mask bits.
#[derive(Debug, Clone, PartialEq)]
pub struct IrisCode {
    pub bits: Vec<u8>,
    pub mask_bits: Vec<u8>,
}

/// Wrap-padded copies of one image, one grid per distinct pad size.
pub struct PaddedImage {
    grids: Vec<Grid>,
    kernel_to_grid: Vec<usize>,
}

impl PaddedImage {
    /// Pad an image once per distinct kernel pad size.
    pub fn new(img: &Grid, kernels: &[Kernel]) -> Result<Self> {
        let mut pads: Vec<(usize, usize)> = Vec::new();
        let mut kernel_to_grid = Vec::with_capacity(kernels.len());
        for k in kernels {
            let pad = k.pads();
            let idx = match pads.iter().position(|p| *p == pad) {
                Some(i) => i,
                None => {
                    pads.push(pad);
                    pads.len() - 1
                }
            };
            kernel_to_grid.push(idx);
        }
        let grids = pads
            .iter()
            .map(|&(py, px)| wrap_pad(img, py, px))
            .collect::<Result<Vec<_>>>()?;
        Ok(PaddedImage {
            grids,
            kernel_to_grid,
        })
    }

    #[inline]
    pub fn for_kernel(&self, k: usize) -> &Grid {
        &self.grids[self.kernel_to_grid[k]]
    }
}

/// Raw pre-activation responses at the sampled points, map-major.
pub fn sampled_responses(padded: &PaddedImage, kernels: &[Kernel], map: &SamplingMap) -> Vec<f64> {
    let mut out = Vec::with_capacity(kernels.len() * map.map_points(0).len());
    for (ki, kernel) in kernels.iter().enumerate() {
        let grid = padded.for_kernel(ki);
        for &(r, c) in map.map_points(ki) {
            out.push(response_at(grid, kernel, r, c));
        }
    }
    out
}

/// Sigmoid features at the sampled points, map-major. Works for any image
/// size and kernel count; the 64x512 six-kernel contract is enforced by
/// [`encode_features`].
pub fn sampled_features(img: &Grid, kernels: &[Kernel], map: &SamplingMap) -> Result<Vec<f64>> {
    let padded = PaddedImage::new(img, kernels)?;
    Ok(sampled_responses(&padded, kernels, map)
        .into_iter()
        .map(sigmoid)
        .collect())
}

/// Encode a normalized iris into its 1536-element feature vector:
/// per kernel, wrap pad, convolve, sigmoid, read the sampled points.
pub fn encode_features(
    iris: &NormalizedIris,
    bank: &KernelBank,
    map: &SamplingMap,
) -> Result<FeatureVector> {
    FeatureVector::new(sampled_features(iris.grid(), bank.kernels(), map)?)
}

/// Threshold features at 0.5 (equivalently raw responses at zero).
/// A value of exactly 0.5 maps to bit 0.
pub fn binarize(features: &FeatureVector) -> Vec<u8> {
    features.values.iter().map(|&v| u8::from(v > 0.5)).collect()
}

/// Sample an occlusion mask at the map coordinates, one 256-bit block per
/// response map (identical blocks when the map is shared).
pub fn sample_mask(mask: &OcclusionMask, map: &SamplingMap) -> Vec<u8> {
    let mut out = Vec::with_capacity(CODE_LEN);
    for k in 0..MAP_COUNT {
        for &(r, c) in map.map_points(k) {
            out.push(mask.get(r, c));
        }
    }
    out
}

/// Sampled AND of two masks, equal to `sample_mask(combine_masks(a, b), map)`
/// without materializing the combined raster.
pub fn sampled_combined_mask(a: &OcclusionMask, b: &OcclusionMask, map: &SamplingMap) -> Vec<u8> {
    let mut out = Vec::with_capacity(CODE_LEN);
    for k in 0..MAP_COUNT {
        for &(r, c) in map.map_points(k) {
            out.push(a.get(r, c) & b.get(r, c));
        }
    }
    out
}

/// Full encode: features, binarization, and the image's own sampled mask.
pub fn encode_code(
    iris: &NormalizedIris,
    mask: &OcclusionMask,
    bank: &KernelBank,
    map: &SamplingMap,
) -> Result<IrisCode> {
    let features = encode_features(iris, bank, map)?;
    Ok(IrisCode {
        bits: binarize(&features),
        mask_bits: sample_mask(mask, map),
    })
}

const CODE_MAGIC: &[u8; 4] = b"IRC1";
const PLANE_BYTES: usize = CODE_LEN / 8;

fn pack_bits(bits: &[u8]) -> Vec<u8> {
    let mut out = vec![0u8; PLANE_BYTES];
    for (i, &b) in bits.iter().enumerate() {
        if b != 0 {
            out[i / 8] |= 1 << (7 - (i % 8));
        }
    }
    out
}

fn unpack_bits(bytes: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(CODE_LEN);
    for i in 0..CODE_LEN {
        out.push((bytes[i / 8] >> (7 - (i % 8))) & 1);
    }
    out
}

/// Write the compact binary code file: `IRC1` magic, 192-byte bit plane,
/// 192-byte mask plane, bits packed MSB-first.
pub fn write_code(path: &Path, code: &IrisCode) -> Result<()> {
    let mut out = Vec::with_capacity(4 + 2 * PLANE_BYTES);
    out.extend_from_slice(CODE_MAGIC);
    out.extend_from_slice(&pack_bits(&code.bits));
    out.extend_from_slice(&pack_bits(&code.mask_bits));
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn read_code(path: &Path) -> Result<IrisCode> {
    let data = fs::read(path).map_err(|e| {
        if e.kind() == std::io::ErrorKind::NotFound {
            Error::MissingFile(path.to_path_buf())
        } else {
            Error::io(path, e)
        }
    })?;
    if data.len() != 4 + 2 * PLANE_BYTES {
        return Err(Error::CodeFormat {
            path: path.to_path_buf(),
            detail: format!("expected {} bytes, got {}", 4 + 2 * PLANE_BYTES, data.len()),
        });
    }
    if &data[..4] != CODE_MAGIC {
        return Err(Error::CodeFormat {
            path: path.to_path_buf(),
            detail: "bad magic".into(),
        });
    }
    Ok(IrisCode {
        bits: unpack_bits(&data[4..4 + PLANE_BYTES]),
        mask_bits: unpack_bits(&data[4 + PLANE_BYTES..]),
    })
}
