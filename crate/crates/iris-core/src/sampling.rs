//! Bit-sampling coordinates: the fixed 256 (row, col) locations read from
//! each response map to form the code.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::image::{IRIS_COLS, IRIS_ROWS};

pub const POINTS_PER_MAP: usize = 256;
pub const MAP_COUNT: usize = 6;
/// Total code length: six maps of 256 sampled bits.
pub const CODE_LEN: usize = POINTS_PER_MAP * MAP_COUNT;

pub type Point = (usize, usize);

/// Sampling coordinates, either one list shared by all six maps (the default,
/// mirroring how masks are sampled once and replicated) or six per-map lists.
#[derive(Debug, Clone, PartialEq)]
pub enum SamplingMap {
    Shared(Vec<Point>),
    PerMap(Vec<Vec<Point>>),
}

fn validate_points(points: &[Point], which: &str) -> Result<()> {
    if points.len() != POINTS_PER_MAP {
        return Err(Error::SamplingMapFormat(format!(
            "{}: expected {} points, got {}",
            which,
            POINTS_PER_MAP,
            points.len()
        )));
    }
    let mut seen = std::collections::HashSet::new();
    for &(r, c) in points {
        if r >= IRIS_ROWS || c >= IRIS_COLS {
            return Err(Error::SamplingMapFormat(format!(
                "{}: point ({},{}) out of range",
                which, r, c
            )));
        }
        if !seen.insert((r, c)) {
            return Err(Error::SamplingMapFormat(format!(
                "{}: duplicate point ({},{})",
                which, r, c
            )));
        }
    }
    Ok(())
}

impl SamplingMap {
    pub fn shared(points: Vec<Point>) -> Result<Self> {
        validate_points(&points, "shared map")?;
        Ok(SamplingMap::Shared(points))
    }

    pub fn per_map(lists: Vec<Vec<Point>>) -> Result<Self> {
        if lists.len() != MAP_COUNT {
            return Err(Error::SamplingMapFormat(format!(
                "per-map format needs {} lists, got {}",
                MAP_COUNT,
                lists.len()
            )));
        }
        for (i, list) in lists.iter().enumerate() {
            validate_points(list, &format!("map {}", i))?;
        }
        Ok(SamplingMap::PerMap(lists))
    }

    /// Uniform 8x32 grid: rows {4,12,...,60}, cols {8,24,...,504}, row-major.
    pub fn default_grid() -> Self {
        let mut points = Vec::with_capacity(POINTS_PER_MAP);
        for r in 0..8 {
            for c in 0..32 {
                points.push((4 + 8 * r, 8 + 16 * c));
            }
        }
        SamplingMap::Shared(points)
    }

    /// Coordinates used for map `k` (0..6).
    pub fn map_points(&self, k: usize) -> &[Point] {
        match self {
            SamplingMap::Shared(p) => p,
            SamplingMap::PerMap(lists) => &lists[k],
        }
    }

    pub fn shared_points(&self) -> Option<&[Point]> {
        match self {
            SamplingMap::Shared(p) => Some(p),
            SamplingMap::PerMap(_) => None,
        }
    }

    /// Detect Cartesian grid structure of a shared map: the point set must be
    /// exactly rows x cols with every combination present. Required for
    /// column-shift search on codes.
    pub fn grid_structure(&self) -> Option<GridStructure> {
        let points = self.shared_points()?;
        let mut rows: Vec<usize> = points.iter().map(|p| p.0).collect();
        let mut cols: Vec<usize> = points.iter().map(|p| p.1).collect();
        rows.sort_unstable();
        rows.dedup();
        cols.sort_unstable();
        cols.dedup();
        if rows.len() * cols.len() != points.len() {
            return None;
        }
        let index_of: std::collections::HashMap<Point, usize> = points
            .iter()
            .enumerate()
            .map(|(i, &p)| (p, i))
            .collect();
        for &r in &rows {
            for &c in &cols {
                index_of.get(&(r, c))?;
            }
        }
        Some(GridStructure {
            rows,
            cols,
            point_index: index_of,
        })
    }
}

/// Grid decomposition of a shared sampling map.
pub struct GridStructure {
    pub rows: Vec<usize>,
    pub cols: Vec<usize>,
    point_index: std::collections::HashMap<Point, usize>,
}

impl GridStructure {
    /// Permutation realizing a circular shift of the underlying image by
    /// `shift` grid columns: entry `i` gives the source point index whose
    /// value lands at point `i` after the shift.
    pub fn shift_permutation(&self, points: &[Point], shift: i64) -> Vec<usize> {
        let n = self.cols.len() as i64;
        points
            .iter()
            .map(|&(r, c)| {
                let j = self.cols.binary_search(&c).expect("grid col") as i64;
                let src_j = (j - shift).rem_euclid(n) as usize;
                self.point_index[&(r, self.cols[src_j])]
            })
            .collect()
    }
}

/// Parse a sampling map file: 256 `row col` lines, or the per-map extension
/// starting with a `maps 6` header followed by 6x256 lines (map-major).
pub fn parse_sampling_map(text: &str) -> Result<SamplingMap> {
    let mut lines = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .peekable();

    let parse_point = |line: &str| -> Result<Point> {
        let mut it = line.split_whitespace();
        let r = it
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| Error::SamplingMapFormat(format!("bad line '{}'", line)))?;
        let c = it
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| Error::SamplingMapFormat(format!("bad line '{}'", line)))?;
        if it.next().is_some() {
            return Err(Error::SamplingMapFormat(format!("bad line '{}'", line)));
        }
        Ok((r, c))
    };

    let per_map = matches!(lines.peek(), Some(l) if l.starts_with("maps"));
    if per_map {
        let header = lines.next().unwrap();
        if header.split_whitespace().collect::<Vec<_>>() != ["maps", "6"] {
            return Err(Error::SamplingMapFormat(format!(
                "unsupported header '{}'",
                header
            )));
        }
        let mut lists = Vec::with_capacity(MAP_COUNT);
        for _ in 0..MAP_COUNT {
            let mut list = Vec::with_capacity(POINTS_PER_MAP);
            for _ in 0..POINTS_PER_MAP {
                let line = lines
                    .next()
                    .ok_or_else(|| Error::SamplingMapFormat("truncated per-map file".into()))?;
                list.push(parse_point(line)?);
            }
            lists.push(list);
        }
        if lines.next().is_some() {
            return Err(Error::SamplingMapFormat("trailing content".into()));
        }
        SamplingMap::per_map(lists)
    } else {
        let points = lines.map(parse_point).collect::<Result<Vec<_>>>()?;
        SamplingMap::shared(points)
    }
}

pub fn load_sampling_map(path: &Path) -> Result<SamplingMap> {
    let text = fs::read_to_string(path).map_err(|e| {
        if e.kind() == std::io::ErrorKind::NotFound {
            Error::MissingFile(path.to_path_buf())
        } else {
            Error::io(path, e)
        }
    })?;
    parse_sampling_map(&text)
}

pub fn save_sampling_map(map: &SamplingMap, path: &Path) -> Result<()> {
    let mut out = String::new();
    match map {
        SamplingMap::Shared(points) => {
            for &(r, c) in points {
                out.push_str(&format!("{} {}\n", r, c));
            }
        }
        SamplingMap::PerMap(lists) => {
            out.push_str("maps 6\n");
            for list in lists {
                for &(r, c) in list {
                    out.push_str(&format!("{} {}\n", r, c));
                }
            }
        }
    }
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_grid_shape_and_extremes() {
        let map = SamplingMap::default_grid();
        let points = map.shared_points().unwrap();
        assert_eq!(points.len(), 256);
        assert_eq!(points.iter().min().unwrap(), &(4, 8));
        assert_eq!(points.iter().max().unwrap(), &(60, 504));
        assert!(map.grid_structure().is_some());
    }

    #[test]
    fn wrong_count_rejected() {
        let text: String = (0..255).map(|i| format!("{} {}\n", i % 64, i)).collect();
        assert!(matches!(
            parse_sampling_map(&text),
            Err(Error::SamplingMapFormat(_))
        ));
    }

    #[test]
    fn out_of_range_and_duplicates_rejected() {
        assert!(SamplingMap::shared(vec![(64, 0); 256]).is_err());
        assert!(SamplingMap::shared(vec![(0, 0); 256]).is_err());
    }

    #[test]
    fn file_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("map.txt");
        let map = SamplingMap::default_grid();
        save_sampling_map(&map, &path).unwrap();
        assert_eq!(load_sampling_map(&path).unwrap(), map);
    }

    #[test]
    fn per_map_extension_roundtrip() {
        let base = match SamplingMap::default_grid() {
            SamplingMap::Shared(p) => p,
            _ => unreachable!(),
        };
        let lists: Vec<Vec<Point>> = (0..6)
            .map(|k| {
                base.iter()
                    .map(|&(r, c)| (r, (c + k) % 512))
                    .collect()
            })
            .collect();
        let map = SamplingMap::per_map(lists).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("permap.txt");
        save_sampling_map(&map, &path).unwrap();
        assert_eq!(load_sampling_map(&path).unwrap(), map);
        assert!(map.grid_structure().is_none());
    }

    #[test]
    fn shift_permutation_round_trips() {
        let map = SamplingMap::default_grid();
        let gs = map.grid_structure().unwrap();
        let points = map.shared_points().unwrap();
        let perm = gs.shift_permutation(points, 1);
        // shifting by one grid column moves col 8 -> col 24 etc.
        for (i, &(r, c)) in points.iter().enumerate() {
            let (sr, sc) = points[perm[i]];
            assert_eq!(sr, r);
            let expect = if c == 8 { 504 } else { c - 16 };
            assert_eq!(sc, expect);
        }
        // shift 0 is the identity
        let id = gs.shift_permutation(points, 0);
        assert!(id.iter().enumerate().all(|(i, &p)| i == p));
    }
}
