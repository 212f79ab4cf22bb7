//! Crate-wide error type.

use std::fmt;
use std::io;
use std::path::PathBuf;

/// Errors produced by any stage of the pipeline.
#[derive(Debug)]
pub enum Error {
    /// Underlying I/O failure, with the path that was being accessed.
    Io { path: PathBuf, source: io::Error },
    /// A referenced file does not exist.
    MissingFile(PathBuf),
    /// Malformed PGM data.
    PgmFormat { path: PathBuf, detail: String },
    /// Image or mask does not have the expected dimensions.
    Dimension {
        what: String,
        expected: (usize, usize),
        actual: (usize, usize),
    },
    /// Malformed manifest row or structure.
    ManifestFormat { line: usize, detail: String },
    /// The same (class_id, image) row appears twice in a manifest.
    DuplicateEntry { class_id: String, path: String },
    /// A class mixes different eye sides.
    MixedEyeSides { class_id: String },
    /// Padding amount is not smaller than the image dimension.
    PadTooLarge {
        pad: (usize, usize),
        dims: (usize, usize),
    },
    /// Convolution input smaller than the kernel.
    ConvShape {
        padded: (usize, usize),
        kernel: (usize, usize),
    },
    /// Malformed or out-of-contract kernel file.
    KernelFormat(String),
    /// Invalid Gabor parameter (nonpositive sigma or wavelength).
    GaborParam(String),
    /// Malformed or out-of-contract sampling map file.
    SamplingMapFormat(String),
    /// Malformed iris-code file.
    CodeFormat { path: PathBuf, detail: String },
    /// No jointly valid bits: the combined mask of a comparison is empty.
    UnscorableComparison,
    /// Shift search requested on a sampling map without grid structure.
    ShiftUnsupported,
    /// A pair references an image with no encoded code available.
    MissingCode(String),
    /// Combined sampled mask of a triplet is all-zero.
    DegenerateTriplet,
    /// Not enough classes to mine a batch or build a validation set.
    InsufficientClasses { needed: usize, available: usize },
    /// A gradient became non-finite; diagnostics name the kernel and weight.
    NonFiniteGradient { kernel: usize, index: usize },
    /// Score lists too small or empty for the requested statistic.
    InsufficientScores(String),
    /// Malformed training config or checkpoint state.
    ConfigFormat(String),
    /// Validation classes overlap training classes.
    SplitOverlap { class_id: String },
    /// Generic invalid-argument error for CLI-level misuse.
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Stable process exit code for scripting: 2 = data error, 3 = numeric failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::NonFiniteGradient { .. } => 3,
            Error::InvalidArgument(_) => 1,
            _ => 2,
        }
    }
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Io { path, source } => write!(f, "i/o error on {}: {}", path.display(), source),
            Error::MissingFile(p) => write!(f, "file not found: {}", p.display()),
            Error::PgmFormat { path, detail } => {
                write!(f, "invalid PGM {}: {}", path.display(), detail)
            }
            Error::Dimension {
                what,
                expected,
                actual,
            } => write!(
                f,
                "{}: expected {}x{}, got {}x{}",
                what, expected.0, expected.1, actual.0, actual.1
            ),
            Error::ManifestFormat { line, detail } => {
                write!(f, "manifest line {}: {}", line, detail)
            }
            Error::DuplicateEntry { class_id, path } => {
                write!(f, "duplicate manifest entry: class {} image {}", class_id, path)
            }
            Error::MixedEyeSides { class_id } => {
                write!(f, "class {} mixes different eye sides", class_id)
            }
            Error::PadTooLarge { pad, dims } => write!(
                f,
                "pad ({},{}) must be smaller than image dims ({},{})",
                pad.0, pad.1, dims.0, dims.1
            ),
            Error::ConvShape { padded, kernel } => write!(
                f,
                "padded input {}x{} smaller than kernel {}x{}",
                padded.0, padded.1, kernel.0, kernel.1
            ),
            Error::KernelFormat(d) => write!(f, "kernel file: {}", d),
            Error::GaborParam(d) => write!(f, "gabor parameter: {}", d),
            Error::SamplingMapFormat(d) => write!(f, "sampling map: {}", d),
            Error::CodeFormat { path, detail } => {
                write!(f, "invalid code file {}: {}", path.display(), detail)
            }
            Error::UnscorableComparison => {
                write!(f, "unscorable comparison: combined mask has no valid bits")
            }
            Error::ShiftUnsupported => write!(
                f,
                "shift search requires a grid-structured shared sampling map"
            ),
            Error::MissingCode(p) => write!(f, "no code found for image {}", p),
            Error::DegenerateTriplet => {
                write!(f, "degenerate triplet: combined sampled mask is all-zero")
            }
            Error::InsufficientClasses { needed, available } => write!(
                f,
                "insufficient classes: need {}, have {}",
                needed, available
            ),
            Error::NonFiniteGradient { kernel, index } => write!(
                f,
                "non-finite gradient at kernel {} weight {}",
                kernel, index
            ),
            Error::InsufficientScores(d) => write!(f, "insufficient scores: {}", d),
            Error::ConfigFormat(d) => write!(f, "config: {}", d),
            Error::SplitOverlap { class_id } => write!(
                f,
                "class {} appears in both training and validation manifests",
                class_id
            ),
            Error::InvalidArgument(d) => write!(f, "invalid argument: {}", d),
        }
    }
}

impl std::error::Error for Error {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            Error::Io { source, .. } => Some(source),
            _ => None,
        }
    }
}
