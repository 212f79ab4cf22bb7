//! Binary PGM (P5) reading and writing.
//!
//! The pipeline's on-disk raster format: 8-bit grayscale, maxval 255.
//! Iris images are stored as intensities (divided by 255 on load); masks are
//! stored as 0/255 and thresholded at 128 on load.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::image::{NormalizedIris, OcclusionMask, IRIS_COLS, IRIS_ROWS};

/// Raw 8-bit PGM payload.
pub struct Pgm {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<u8>,
}

fn format_err(path: &Path, detail: impl Into<String>) -> Error {
    Error::PgmFormat {
        path: path.to_path_buf(),
        detail: detail.into(),
    }
}

/// Parse header tokens, skipping whitespace and `#` comments.
fn next_token(data: &[u8], pos: &mut usize) -> Option<Vec<u8>> {
    loop {
        while *pos < data.len() && data[*pos].is_ascii_whitespace() {
            *pos += 1;
        }
        if *pos < data.len() && data[*pos] == b'#' {
            while *pos < data.len() && data[*pos] != b'\n' {
                *pos += 1;
            }
            continue;
        }
        break;
    }
    if *pos >= data.len() {
        return None;
    }
    let start = *pos;
    while *pos < data.len() && !data[*pos].is_ascii_whitespace() {
        *pos += 1;
    }
    Some(data[start..*pos].to_vec())
}

fn parse_dims(data: &[u8], path: &Path) -> Result<(usize, usize, usize, usize)> {
    let mut pos = 0usize;
    let magic = next_token(data, &mut pos).ok_or_else(|| format_err(path, "empty file"))?;
    if magic != b"P5" {
        return Err(format_err(path, "not a binary PGM (P5)"));
    }
    let mut num = |name: &str| -> Result<usize> {
        let tok = next_token(data, &mut pos)
            .ok_or_else(|| format_err(path, format!("missing {}", name)))?;
        std::str::from_utf8(&tok)
            .ok()
            .and_then(|s| s.parse::<usize>().ok())
            .ok_or_else(|| format_err(path, format!("invalid {}", name)))
    };
    let width = num("width")?;
    let height = num("height")?;
    let maxval = num("maxval")?;
    if maxval != 255 {
        return Err(format_err(path, format!("maxval must be 255, got {}", maxval)));
    }
    // exactly one whitespace byte separates the header from the raster
    if pos >= data.len() || !data[pos].is_ascii_whitespace() {
        return Err(format_err(path, "missing raster separator"));
    }
    pos += 1;
    Ok((width, height, maxval, pos))
}

pub fn read(path: &Path) -> Result<Pgm> {
    let data = fs::read(path).map_err(|e| {
        if e.kind() == std::io::ErrorKind::NotFound {
            Error::MissingFile(path.to_path_buf())
        } else {
            Error::io(path, e)
        }
    })?;
    let (width, height, _maxval, offset) = parse_dims(&data, path)?;
    let need = width * height;
    if data.len() < offset + need {
        return Err(format_err(path, "truncated raster"));
    }
    Ok(Pgm {
        width,
        height,
        pixels: data[offset..offset + need].to_vec(),
    })
}

/// Read only the header and return (height, width).
pub fn read_dims(path: &Path) -> Result<(usize, usize)> {
    let data = fs::read(path).map_err(|e| {
        if e.kind() == std::io::ErrorKind::NotFound {
            Error::MissingFile(path.to_path_buf())
        } else {
            Error::io(path, e)
        }
    })?;
    let (width, height, _, _) = parse_dims(&data, path)?;
    Ok((height, width))
}

pub fn write(path: &Path, width: usize, height: usize, pixels: &[u8]) -> Result<()> {
    assert_eq!(pixels.len(), width * height);
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    let mut out = Vec::with_capacity(pixels.len() + 32);
    write!(out, "P5\n{} {}\n255\n", width, height).expect("in-memory write");
    out.extend_from_slice(pixels);
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Load a 64x512 normalized iris image; intensities divided by 255.
pub fn read_iris(path: &Path) -> Result<NormalizedIris> {
    let pgm = read(path)?;
    if (pgm.height, pgm.width) != (IRIS_ROWS, IRIS_COLS) {
        return Err(Error::Dimension {
            what: format!("iris image {}", path.display()),
            expected: (IRIS_ROWS, IRIS_COLS),
            actual: (pgm.height, pgm.width),
        });
    }
    let data = pgm.pixels.iter().map(|&p| f64::from(p) / 255.0).collect();
    NormalizedIris::new(Grid::from_vec(IRIS_ROWS, IRIS_COLS, data))
}

/// Load a 64x512 occlusion mask; pixels >= 128 are valid (1), else occluded (0).
pub fn read_mask(path: &Path) -> Result<OcclusionMask> {
    let pgm = read(path)?;
    if (pgm.height, pgm.width) != (IRIS_ROWS, IRIS_COLS) {
        return Err(Error::Dimension {
            what: format!("mask {}", path.display()),
            expected: (IRIS_ROWS, IRIS_COLS),
            actual: (pgm.height, pgm.width),
        });
    }
    let bits = pgm.pixels.iter().map(|&p| u8::from(p >= 128)).collect();
    OcclusionMask::new(IRIS_ROWS, IRIS_COLS, bits)
}

/// Write an iris image, mapping [0,1] back to 8-bit by rounding.
pub fn write_iris(path: &Path, iris: &NormalizedIris) -> Result<()> {
    let pixels: Vec<u8> = iris
        .grid()
        .values()
        .iter()
        .map(|&v| (v * 255.0).round().clamp(0.0, 255.0) as u8)
        .collect();
    write(path, IRIS_COLS, IRIS_ROWS, &pixels)
}

/// Write a mask as 0/255 pixels.
pub fn write_mask(path: &Path, mask: &OcclusionMask) -> Result<()> {
    let pixels: Vec<u8> = mask.bits().iter().map(|&b| b * 255).collect();
    write(path, IRIS_COLS, IRIS_ROWS, &pixels)
}
