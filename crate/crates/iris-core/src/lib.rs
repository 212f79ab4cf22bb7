//! Iris-code toolkit built around a single learnable convolutional layer.
//!
//! The pipeline mirrors the classical iris-recognition recipe: a normalized
//! 64x512 iris texture is convolved with a bank of six kernels (wrap-padded
//! so the maps keep their shape), passed through a sigmoid, and sampled at
//! 256 fixed coordinates per map to form a 1536-element feature vector.
//! Thresholding yields a binary iris code; codes compare by mask-weighted
//! fractional Hamming distance. The bank itself can be the classical Gabor
//! set or learned from data with a soft-margin triplet loss, batch-hard
//! negative mining, and hand-derived gradients.
//!
//! Modules follow the pipeline stages:
//!
//! * [`dataset`] - manifests, class grouping, genuine/impostor pair lists
//! * [`align`] - intra-class rotation compensation via Pearson correlation
//! * [`conv`] - wrap padding, valid convolution, sigmoid
//! * [`kernel`] / [`sampling`] - the six-kernel bank and bit-sampling map
//! * [`coder`] - feature vectors, binary codes, code files
//! * [`matcher`] - masked distances and pair scoring
//! * [`trainer`] - triplet-loss training of the bank
//! * [`eval`] - score distributions, ROC/EER, decidability
//! * [`synth`] - deterministic synthetic data for desk-scale experiments

pub mod align;
pub mod coder;
pub mod conv;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod grid;
pub mod image;
pub mod kernel;
pub mod matcher;
pub mod pgm;
pub mod rng;
pub mod sampling;
pub mod synth;
pub mod trainer;

pub use error::{Error, Result};
pub use grid::Grid;
pub use image::{combine_masks, NormalizedIris, OcclusionMask, IRIS_COLS, IRIS_ROWS};
pub use kernel::{Kernel, KernelBank};
pub use sampling::{SamplingMap, CODE_LEN};
