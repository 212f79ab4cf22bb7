//! Convolution kernels and the six-kernel bank: Gabor and random
//! initialization, zero-mean normalization, text serialization, and heatmap
//! export.

use std::fmt::Write as FmtWrite;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::rng::{domain, Stream};

/// Default bank layout: three scale pairs.
pub const DEFAULT_SIZES: [(usize, usize); 6] =
    [(9, 15), (9, 15), (9, 27), (9, 27), (9, 51), (9, 51)];

/// A single real-valued convolution kernel with odd dimensions.
#[derive(Debug, Clone, PartialEq)]
pub struct Kernel {
    rows: usize,
    cols: usize,
    weights: Vec<f64>,
}

impl Kernel {
    pub fn new(rows: usize, cols: usize, weights: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 || rows % 2 == 0 || cols % 2 == 0 {
            return Err(Error::KernelFormat(format!(
                "kernel dimensions must be odd and positive, got {}x{}",
                rows, cols
            )));
        }
        if weights.len() != rows * cols {
            return Err(Error::KernelFormat(format!(
                "expected {} weights for {}x{}, got {}",
                rows * cols,
                rows,
                cols,
                weights.len()
            )));
        }
        Ok(Kernel {
            rows,
            cols,
            weights,
        })
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn weight(&self, u: usize, v: usize) -> f64 {
        self.weights[u * self.cols + v]
    }

    #[inline]
    pub fn row(&self, u: usize) -> &[f64] {
        &self.weights[u * self.cols..(u + 1) * self.cols]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weights_mut(&mut self) -> &mut [f64] {
        &mut self.weights
    }

    /// Wrap-pad amounts preserving the input shape: half the kernel extent.
    pub fn pads(&self) -> (usize, usize) {
        ((self.rows - 1) / 2, (self.cols - 1) / 2)
    }

    pub fn sum(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Subtract the scalar mean from every weight.
    pub fn zero_mean(&self) -> Kernel {
        let mean = self.sum() / self.weights.len() as f64;
        Kernel {
            rows: self.rows,
            cols: self.cols,
            weights: self.weights.iter().map(|w| w - mean).collect(),
        }
    }
}

/// Parameters of one real Gabor kernel:
/// `exp(-(x'^2/2sx^2 + y'^2/2sy^2)) * cos(2*pi*x'/wavelength + phase)`
/// with (x', y') the grid coordinates rotated by `orientation`.
#[derive(Debug, Clone, Copy)]
pub struct GaborParams {
    pub rows: usize,
    pub cols: usize,
    pub wavelength: f64,
    pub orientation: f64,
    pub sigma_x: f64,
    pub sigma_y: f64,
    pub phase: f64,
}

impl GaborParams {
    /// Default parameters for a scale: sigma_x = cols/6, sigma_y = rows/3,
    /// horizontal orientation.
    pub fn for_scale(rows: usize, cols: usize, wavelength: f64, phase: f64) -> Self {
        GaborParams {
            rows,
            cols,
            wavelength,
            orientation: 0.0,
            sigma_x: cols as f64 / 6.0,
            sigma_y: rows as f64 / 3.0,
            phase,
        }
    }
}

/// Sample the real part of a 2D Gabor on the kernel grid centered at zero.
pub fn gabor_kernel(p: &GaborParams) -> Result<Kernel> {
    if p.wavelength <= 0.0 {
        return Err(Error::GaborParam(format!(
            "wavelength must be positive, got {}",
            p.wavelength
        )));
    }
    if p.sigma_x <= 0.0 || p.sigma_y <= 0.0 {
        return Err(Error::GaborParam(format!(
            "sigmas must be positive, got ({}, {})",
            p.sigma_x, p.sigma_y
        )));
    }
    let (cos_t, sin_t) = (p.orientation.cos(), p.orientation.sin());
    let cy = (p.rows as f64 - 1.0) / 2.0;
    let cx = (p.cols as f64 - 1.0) / 2.0;
    let mut weights = Vec::with_capacity(p.rows * p.cols);
    for u in 0..p.rows {
        let y = u as f64 - cy;
        for v in 0..p.cols {
            let x = v as f64 - cx;
            let xr = x * cos_t + y * sin_t;
            let yr = -x * sin_t + y * cos_t;
            let envelope = (-(xr * xr / (2.0 * p.sigma_x * p.sigma_x)
                + yr * yr / (2.0 * p.sigma_y * p.sigma_y)))
                .exp();
            let carrier = (std::f64::consts::TAU * xr / p.wavelength + p.phase).cos();
            weights.push(envelope * carrier);
        }
    }
    Kernel::new(p.rows, p.cols, weights)
}

/// An ordered bank of exactly six kernels.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelBank {
    kernels: Vec<Kernel>,
}

impl KernelBank {
    pub const COUNT: usize = 6;

    pub fn new(kernels: Vec<Kernel>) -> Result<Self> {
        if kernels.len() != Self::COUNT {
            return Err(Error::KernelFormat(format!(
                "a bank holds exactly {} kernels, got {}",
                Self::COUNT,
                kernels.len()
            )));
        }
        Ok(KernelBank { kernels })
    }

    pub fn kernels(&self) -> &[Kernel] {
        &self.kernels
    }

    pub fn kernels_mut(&mut self) -> &mut [Kernel] {
        &mut self.kernels
    }

    /// Bank of default Gabor kernels: wavelengths {8, 16, 32} px across the
    /// three scales, one even (phase 0) and one odd (phase pi/2) kernel each.
    /// Stand-in defaults; transplant a kernel file to use a specific bank.
    pub fn gabor_default() -> Self {
        let wavelengths = [8.0, 16.0, 32.0];
        let mut kernels = Vec::with_capacity(Self::COUNT);
        for scale in 0..3 {
            let (rows, cols) = DEFAULT_SIZES[2 * scale];
            for phase in [0.0, std::f64::consts::FRAC_PI_2] {
                let p = GaborParams::for_scale(rows, cols, wavelengths[scale], phase);
                kernels.push(gabor_kernel(&p).expect("default gabor parameters are valid"));
            }
        }
        KernelBank { kernels }
    }

    /// Bank from explicit per-kernel Gabor parameters.
    pub fn gabor_from_params(params: &[GaborParams]) -> Result<Self> {
        let kernels = params.iter().map(gabor_kernel).collect::<Result<Vec<_>>>()?;
        KernelBank::new(kernels)
    }

    /// Bank of i.i.d. uniform weights in [-0.05, 0.05], deterministic in seed.
    pub fn random_init(seed: u64, sizes: &[(usize, usize)]) -> Result<Self> {
        let kernels = sizes
            .iter()
            .enumerate()
            .map(|(i, &(rows, cols))| {
                let mut stream = Stream::keyed(seed, domain::KERNEL_INIT, &[i as u64]);
                let weights = (0..rows * cols)
                    .map(|_| stream.range_f64(-0.05, 0.05))
                    .collect();
                Kernel::new(rows, cols, weights)
            })
            .collect::<Result<Vec<_>>>()?;
        KernelBank::new(kernels)
    }

    /// Zero-mean every kernel so responses binarize around zero.
    pub fn zero_mean(&self) -> KernelBank {
        KernelBank {
            kernels: self.kernels.iter().map(Kernel::zero_mean).collect(),
        }
    }
}

fn fmt_weight(w: f64) -> String {
    // 17 significant digits: enough for bit-exact f64 round-trip
    format!("{:.16e}", w)
}

/// Serialize a raw kernel list (used for banks and optimizer state blocks).
pub fn format_kernel_list(kernels: &[Kernel]) -> String {
    let mut out = String::new();
    writeln!(out, "{}", kernels.len()).unwrap();
    for k in kernels {
        writeln!(out, "{} {}", k.rows(), k.cols()).unwrap();
        for u in 0..k.rows() {
            let line: Vec<String> = k.row(u).iter().map(|w| fmt_weight(*w)).collect();
            writeln!(out, "{}", line.join(" ")).unwrap();
        }
    }
    out
}

/// Parse a kernel list from the text format.
pub fn parse_kernel_list(text: &str) -> Result<Vec<Kernel>> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let kernels = parse_kernel_list_from(&mut lines)?;
    if lines.next().is_some() {
        return Err(Error::KernelFormat("trailing content after kernels".into()));
    }
    Ok(kernels)
}

/// Parse one kernel-list block from a line stream, consuming exactly the
/// lines it needs. Lets several blocks share one file (optimizer state).
pub fn parse_kernel_list_from<'a, I>(lines: &mut I) -> Result<Vec<Kernel>>
where
    I: Iterator<Item = &'a str>,
{
    let count: usize = lines
        .next()
        .ok_or_else(|| Error::KernelFormat("empty file".into()))?
        .trim()
        .parse()
        .map_err(|_| Error::KernelFormat("invalid kernel count".into()))?;
    let mut kernels = Vec::with_capacity(count);
    for i in 0..count {
        let dims = lines
            .next()
            .ok_or_else(|| Error::KernelFormat(format!("missing dims for kernel {}", i)))?;
        let mut parts = dims.trim().split_whitespace();
        let rows: usize = parts
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::KernelFormat(format!("bad dims line for kernel {}", i)))?;
        let cols: usize = parts
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::KernelFormat(format!("bad dims line for kernel {}", i)))?;
        let mut weights = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            let line = lines.next().ok_or_else(|| {
                Error::KernelFormat(format!("missing row {} of kernel {}", r, i))
            })?;
            for tok in line.trim().split_whitespace() {
                let w: f64 = tok.parse().map_err(|_| {
                    Error::KernelFormat(format!("bad weight '{}' in kernel {}", tok, i))
                })?;
                weights.push(w);
            }
            if weights.len() != (r + 1) * cols {
                return Err(Error::KernelFormat(format!(
                    "kernel {} row {} has wrong width",
                    i, r
                )));
            }
        }
        kernels.push(Kernel::new(rows, cols, weights)?);
    }
    Ok(kernels)
}

/// Save a bank to the text kernel format.
pub fn save_kernels(bank: &KernelBank, path: &Path) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    fs::write(path, format_kernel_list(bank.kernels())).map_err(|e| Error::io(path, e))
}

/// Load a bank; the file must declare exactly six odd-dimension kernels.
pub fn load_kernels(path: &Path) -> Result<KernelBank> {
    let text = fs::read_to_string(path).map_err(|e| {
        if e.kind() == std::io::ErrorKind::NotFound {
            Error::MissingFile(path.to_path_buf())
        } else {
            Error::io(path, e)
        }
    })?;
    KernelBank::new(parse_kernel_list(&text)?)
}

/// Export per-kernel heatmaps (min-max normalized PGM) and raw-weight CSVs.
/// Returns the list of files written.
pub fn export_kernel_heatmaps(bank: &KernelBank, dir: &Path) -> Result<Vec<std::path::PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written = Vec::new();
    for (i, k) in bank.kernels().iter().enumerate() {
        let lo = k.weights().iter().copied().fold(f64::INFINITY, f64::min);
        let hi = k.weights().iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let pixels: Vec<u8> = if hi > lo {
            k.weights()
                .iter()
                .map(|w| (((w - lo) / (hi - lo)) * 255.0).round() as u8)
                .collect()
        } else {
            // degenerate constant kernel renders mid-gray
            vec![128; k.weights().len()]
        };
        let pgm_path = dir.join(format!("kernel_{}.pgm", i));
        crate::pgm::write(&pgm_path, k.cols(), k.rows(), &pixels)?;
        written.push(pgm_path);

        let mut csv = String::new();
        for u in 0..k.rows() {
            let line: Vec<String> = k.row(u).iter().map(|w| format!("{}", w)).collect();
            writeln!(csv, "{}", line.join(",")).unwrap();
        }
        let csv_path = dir.join(format!("kernel_{}.csv", i));
        fs::write(&csv_path, csv).map_err(|e| Error::io(&csv_path, e))?;
        written.push(csv_path);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_bank_has_expected_sizes() {
        let bank = KernelBank::gabor_default();
        let sizes: Vec<(usize, usize)> = bank
            .kernels()
            .iter()
            .map(|k| (k.rows(), k.cols()))
            .collect();
        assert_eq!(sizes, DEFAULT_SIZES.to_vec());
        let pads: Vec<(usize, usize)> = bank.kernels().iter().map(Kernel::pads).collect();
        assert_eq!(pads[0], (4, 7));
        assert_eq!(pads[2], (4, 13));
        assert_eq!(pads[4], (4, 25));
    }

    #[test]
    fn even_gabor_is_symmetric_in_x() {
        let p = GaborParams::for_scale(9, 15, 8.0, 0.0);
        let k = gabor_kernel(&p).unwrap();
        // center value exp(0)*cos(0) = 1
        assert_eq!(k.weight(4, 7), 1.0);
        for u in 0..9 {
            for v in 0..15 {
                let mirrored = k.weight(u, 14 - v);
                assert!((k.weight(u, v) - mirrored).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn odd_gabor_is_antisymmetric_and_zero_sum() {
        let p = GaborParams::for_scale(9, 15, 8.0, std::f64::consts::FRAC_PI_2);
        let k = gabor_kernel(&p).unwrap();
        for u in 0..9 {
            for v in 0..15 {
                let mirrored = k.weight(u, 14 - v);
                assert!((k.weight(u, v) + mirrored).abs() < 1e-12);
            }
        }
        assert!(k.sum().abs() <= 1e-12);
    }

    #[test]
    fn gabor_rejects_bad_params() {
        let mut p = GaborParams::for_scale(9, 15, 8.0, 0.0);
        p.wavelength = 0.0;
        assert!(gabor_kernel(&p).is_err());
        let mut p2 = GaborParams::for_scale(9, 15, 8.0, 0.0);
        p2.sigma_y = -1.0;
        assert!(gabor_kernel(&p2).is_err());
    }

    #[test]
    fn zero_mean_drives_sum_below_tolerance() {
        let mut s = crate::rng::Stream::new(8);
        for _ in 0..20 {
            let weights: Vec<f64> = (0..9 * 51).map(|_| s.range_f64(-3.0, 3.0)).collect();
            let k = Kernel::new(9, 51, weights).unwrap().zero_mean();
            assert!(k.sum().abs() <= 1e-12, "sum {}", k.sum());
        }
    }

    #[test]
    fn zero_mean_is_idempotent() {
        let k = Kernel::new(3, 3, vec![1.0; 9]).unwrap();
        let z = k.zero_mean();
        assert!(z.weights().iter().all(|w| *w == 0.0));
        let z2 = z.zero_mean();
        for (a, b) in z.weights().iter().zip(z2.weights()) {
            assert!((a - b).abs() <= 1e-15);
        }
    }

    #[test]
    fn random_init_is_deterministic_and_bounded() {
        let a = KernelBank::random_init(7, &DEFAULT_SIZES).unwrap();
        let b = KernelBank::random_init(7, &DEFAULT_SIZES).unwrap();
        assert_eq!(a, b);
        let c = KernelBank::random_init(8, &DEFAULT_SIZES).unwrap();
        assert_ne!(a, c);
        for k in a.kernels() {
            assert!(k.weights().iter().all(|w| (-0.05..=0.05).contains(w)));
        }
    }

    #[test]
    fn kernel_file_roundtrip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bank.kernels");
        let bank = KernelBank::random_init(99, &DEFAULT_SIZES).unwrap();
        save_kernels(&bank, &path).unwrap();
        let back = load_kernels(&path).unwrap();
        assert_eq!(bank, back);
    }

    #[test]
    fn bank_load_rejects_wrong_count_and_even_dims() {
        let dir = tempfile::tempdir().unwrap();
        let five = dir.path().join("five.kernels");
        let ks: Vec<Kernel> = (0..5).map(|_| Kernel::new(3, 3, vec![0.0; 9]).unwrap()).collect();
        std::fs::write(&five, format_kernel_list(&ks)).unwrap();
        assert!(load_kernels(&five).is_err());

        let even = dir.path().join("even.kernels");
        std::fs::write(&even, "1\n8 3\n0 0 0\n0 0 0\n0 0 0\n0 0 0\n0 0 0\n0 0 0\n0 0 0\n0 0 0\n")
            .unwrap();
        assert!(matches!(
            parse_kernel_list(&std::fs::read_to_string(&even).unwrap()),
            Err(Error::KernelFormat(_))
        ));
    }

    #[test]
    fn heatmap_export_writes_six_pairs() {
        let dir = tempfile::tempdir().unwrap();
        let bank = KernelBank::gabor_default();
        let files = export_kernel_heatmaps(&bank, dir.path()).unwrap();
        assert_eq!(files.len(), 12);
        // CSV re-parses to full precision
        let csv = std::fs::read_to_string(dir.path().join("kernel_0.csv")).unwrap();
        let parsed: Vec<f64> = csv
            .lines()
            .flat_map(|l| l.split(',').map(|t| t.parse::<f64>().unwrap()))
            .collect();
        assert_eq!(parsed, bank.kernels()[0].weights());
    }

    #[test]
    fn constant_kernel_renders_mid_gray() {
        let dir = tempfile::tempdir().unwrap();
        let mut kernels = KernelBank::gabor_default().kernels().to_vec();
        kernels[0] = Kernel::new(3, 3, vec![0.25; 9]).unwrap();
        let bank = KernelBank::new(kernels).unwrap();
        export_kernel_heatmaps(&bank, dir.path()).unwrap();
        let pgm = crate::pgm::read(&dir.path().join("kernel_0.pgm")).unwrap();
        assert!(pgm.pixels.iter().all(|&p| p == 128));
    }
}
