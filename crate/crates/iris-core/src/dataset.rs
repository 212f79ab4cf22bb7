//! Dataset ingestion: manifest loading, class grouping, and genuine/impostor
//! pair-list generation.
//!
//! A manifest is a UTF-8 CSV with header `class_id,eye_side,image,mask`;
//! image and mask paths are resolved relative to the manifest's directory.
//! Entries are kept sorted by (class_id, image path) so every downstream
//! step sees a deterministic order.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::image::{NormalizedIris, OcclusionMask, IRIS_COLS, IRIS_ROWS};
use crate::pgm;
use crate::rng::{domain, hash_str, Stream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum EyeSide {
    Left,
    Right,
    Unknown,
}

impl EyeSide {
    pub fn parse(s: &str) -> Option<EyeSide> {
        match s {
            "left" => Some(EyeSide::Left),
            "right" => Some(EyeSide::Right),
            "unknown" => Some(EyeSide::Unknown),
            _ => None,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            EyeSide::Left => "left",
            EyeSide::Right => "right",
            EyeSide::Unknown => "unknown",
        }
    }
}

impl fmt::Display for EyeSide {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One manifest row. `image` and `mask` keep the manifest-relative strings
/// used in every exported CSV; resolved paths are derived against the root.
#[derive(Debug, Clone)]
pub struct ManifestEntry {
    pub class_id: String,
    pub eye_side: EyeSide,
    pub image: String,
    pub mask: String,
}

/// Contiguous run of entries belonging to one class.
#[derive(Debug, Clone)]
pub struct ClassGroup {
    pub class_id: String,
    pub eye_side: EyeSide,
    pub start: usize,
    pub end: usize,
}

impl ClassGroup {
    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.start == self.end
    }

    pub fn indices(&self) -> std::ops::Range<usize> {
        self.start..self.end
    }
}

/// A loaded manifest with lazily loadable images and masks.
#[derive(Debug, Clone)]
pub struct Dataset {
    root: PathBuf,
    entries: Vec<ManifestEntry>,
    classes: Vec<ClassGroup>,
}

impl Dataset {
    /// Load and validate a manifest CSV. Every referenced file must exist and
    /// carry a 64x512 PGM header; pixel data stays on disk until requested.
    pub fn load(manifest_path: &Path) -> Result<Self> {
        let text = fs::read_to_string(manifest_path).map_err(|e| {
            if e.kind() == std::io::ErrorKind::NotFound {
                Error::MissingFile(manifest_path.to_path_buf())
            } else {
                Error::io(manifest_path, e)
            }
        })?;
        let root = manifest_path
            .parent()
            .unwrap_or_else(|| Path::new("."))
            .to_path_buf();
        let entries = parse_manifest(&text)?;
        let ds = Dataset::from_entries(root, entries)?;
        for entry in &ds.entries {
            for (what, rel) in [("image", &entry.image), ("mask", &entry.mask)] {
                let path = ds.root.join(rel);
                let dims = pgm::read_dims(&path)?;
                if dims != (IRIS_ROWS, IRIS_COLS) {
                    return Err(Error::Dimension {
                        what: format!("{} {}", what, rel),
                        expected: (IRIS_ROWS, IRIS_COLS),
                        actual: dims,
                    });
                }
            }
        }
        Ok(ds)
    }

    /// Build a dataset from in-memory entries without touching the
    /// filesystem. Structural validation only; callers guarantee the files
    /// exist before loading pixels.
    pub fn from_entries(root: PathBuf, mut entries: Vec<ManifestEntry>) -> Result<Self> {
        for e in &entries {
            if e.class_id.is_empty() {
                return Err(Error::ManifestFormat {
                    line: 0,
                    detail: "empty class_id".into(),
                });
            }
        }
        entries.sort_by(|a, b| (&a.class_id, &a.image).cmp(&(&b.class_id, &b.image)));
        for w in entries.windows(2) {
            if w[0].class_id == w[1].class_id {
                if w[0].image == w[1].image {
                    return Err(Error::DuplicateEntry {
                        class_id: w[0].class_id.clone(),
                        path: w[0].image.clone(),
                    });
                }
                if w[0].eye_side != w[1].eye_side {
                    return Err(Error::MixedEyeSides {
                        class_id: w[0].class_id.clone(),
                    });
                }
            }
        }
        let mut classes: Vec<ClassGroup> = Vec::new();
        for (i, e) in entries.iter().enumerate() {
            match classes.last_mut() {
                Some(g) if g.class_id == e.class_id => g.end = i + 1,
                _ => classes.push(ClassGroup {
                    class_id: e.class_id.clone(),
                    eye_side: e.eye_side,
                    start: i,
                    end: i + 1,
                }),
            }
        }
        Ok(Dataset {
            root,
            entries,
            classes,
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn entries(&self) -> &[ManifestEntry] {
        &self.entries
    }

    pub fn classes(&self) -> &[ClassGroup] {
        &self.classes
    }

    pub fn class_ids(&self) -> impl Iterator<Item = &str> {
        self.classes.iter().map(|c| c.class_id.as_str())
    }

    pub fn image_path(&self, idx: usize) -> PathBuf {
        self.root.join(&self.entries[idx].image)
    }

    pub fn mask_path(&self, idx: usize) -> PathBuf {
        self.root.join(&self.entries[idx].mask)
    }

    pub fn load_image(&self, idx: usize) -> Result<NormalizedIris> {
        pgm::read_iris(&self.image_path(idx))
    }

    pub fn load_mask(&self, idx: usize) -> Result<OcclusionMask> {
        pgm::read_mask(&self.mask_path(idx))
    }

    /// All k-choose-2 unordered pairs within each class, in class order.
    pub fn genuine_pairs(&self) -> PairList {
        let mut pairs = Vec::new();
        for class in &self.classes {
            for a in class.indices() {
                for b in a + 1..class.end {
                    pairs.push((a as u32, b as u32));
                }
            }
        }
        PairList {
            kind: PairKind::Genuine,
            pairs,
        }
    }

    /// Impostor sampling: for each reference class, one comparison against
    /// every other class of the same eye side, drawing a fresh random image
    /// of the reference and one of the other class per comparison. The draw
    /// for comparison `j` of class `c` comes from a stream keyed by
    /// (seed, c, j), so the list is a pure function of (manifest, seed) and
    /// independent of evaluation order.
    pub fn impostor_pairs(&self, seed: u64) -> PairList {
        let mut by_side: BTreeMap<EyeSide, Vec<usize>> = BTreeMap::new();
        for (ci, class) in self.classes.iter().enumerate() {
            by_side.entry(class.eye_side).or_default().push(ci);
        }
        let mut pairs = Vec::new();
        for class_indices in by_side.values() {
            for &ref_ci in class_indices {
                let ref_class = &self.classes[ref_ci];
                let key = hash_str(&ref_class.class_id);
                let mut comparison = 0u64;
                for &other_ci in class_indices {
                    if other_ci == ref_ci {
                        continue;
                    }
                    let other = &self.classes[other_ci];
                    let mut stream =
                        Stream::keyed(seed, domain::IMPOSTOR_PAIRS, &[key, comparison]);
                    let a = ref_class.start + stream.below(ref_class.len());
                    let b = other.start + stream.below(other.len());
                    pairs.push((a as u32, b as u32));
                    comparison += 1;
                }
            }
        }
        PairList {
            kind: PairKind::Impostor,
            pairs,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PairKind {
    Genuine,
    Impostor,
}

impl PairKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            PairKind::Genuine => "genuine",
            PairKind::Impostor => "impostor",
        }
    }

    pub fn parse(s: &str) -> Option<PairKind> {
        match s {
            "genuine" => Some(PairKind::Genuine),
            "impostor" => Some(PairKind::Impostor),
            _ => None,
        }
    }
}

/// Pairs of entry indices into the dataset that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct PairList {
    pub kind: PairKind,
    pub pairs: Vec<(u32, u32)>,
}

impl PairList {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Render as CSV rows `path_a,path_b,kind` using manifest-relative paths.
    pub fn to_csv(&self, dataset: &Dataset) -> String {
        let mut out = String::from("path_a,path_b,kind\n");
        for &(a, b) in &self.pairs {
            out.push_str(&format!(
                "{},{},{}\n",
                dataset.entries()[a as usize].image,
                dataset.entries()[b as usize].image,
                self.kind.as_str()
            ));
        }
        out
    }
}

/// A pair row as read back from a pairs CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct PairRow {
    pub path_a: String,
    pub path_b: String,
    pub kind: PairKind,
}

pub fn parse_pairs_csv(text: &str) -> Result<Vec<PairRow>> {
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim_end();
        if line.is_empty() {
            continue;
        }
        if i == 0 && line == "path_a,path_b,kind" {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 3 {
            return Err(Error::ManifestFormat {
                line: i + 1,
                detail: format!("expected 3 fields, got {}", fields.len()),
            });
        }
        let kind = PairKind::parse(fields[2]).ok_or_else(|| Error::ManifestFormat {
            line: i + 1,
            detail: format!("unknown pair kind '{}'", fields[2]),
        })?;
        rows.push(PairRow {
            path_a: fields[0].to_string(),
            path_b: fields[1].to_string(),
            kind,
        });
    }
    Ok(rows)
}

/// Parse manifest CSV text (header `class_id,eye_side,image,mask`).
pub fn parse_manifest(text: &str) -> Result<Vec<ManifestEntry>> {
    let mut entries = Vec::new();
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header.trim_end() == "class_id,eye_side,image,mask" => {}
        Some((_, other)) => {
            return Err(Error::ManifestFormat {
                line: 1,
                detail: format!(
                    "expected header 'class_id,eye_side,image,mask', got '{}'",
                    other
                ),
            })
        }
        None => {
            return Err(Error::ManifestFormat {
                line: 1,
                detail: "empty manifest".into(),
            })
        }
    }
    for (i, line) in lines {
        let line = line.trim_end();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 4 {
            return Err(Error::ManifestFormat {
                line: i + 1,
                detail: format!("expected 4 fields, got {}", fields.len()),
            });
        }
        let eye_side = EyeSide::parse(fields[1]).ok_or_else(|| Error::ManifestFormat {
            line: i + 1,
            detail: format!("unknown eye_side '{}'", fields[1]),
        })?;
        if fields[0].is_empty() {
            return Err(Error::ManifestFormat {
                line: i + 1,
                detail: "empty class_id".into(),
            });
        }
        entries.push(ManifestEntry {
            class_id: fields[0].to_string(),
            eye_side,
            image: fields[2].to_string(),
            mask: fields[3].to_string(),
        });
    }
    Ok(entries)
}

/// Render a manifest back to CSV (entries in dataset order).
pub fn manifest_to_csv(entries: &[ManifestEntry]) -> String {
    let mut out = String::from("class_id,eye_side,image,mask\n");
    for e in entries {
        out.push_str(&format!(
            "{},{},{},{}\n",
            e.class_id, e.eye_side, e.image, e.mask
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn entry(class: &str, side: EyeSide, img: &str) -> ManifestEntry {
        ManifestEntry {
            class_id: class.to_string(),
            eye_side: side,
            image: img.to_string(),
            mask: format!("m_{}", img),
        }
    }

    fn synthetic_dataset(classes: usize, per_class: usize, side: impl Fn(usize) -> EyeSide) -> Dataset {
        let mut entries = Vec::new();
        for c in 0..classes {
            for i in 0..per_class {
                entries.push(entry(
                    &format!("c{:04}", c),
                    side(c),
                    &format!("img_{:04}_{:02}.pgm", c, i),
                ));
            }
        }
        Dataset::from_entries(PathBuf::from("."), entries).unwrap()
    }

    #[test]
    fn manifest_counts_and_grouping() {
        let ds = synthetic_dataset(3, 2, |_| EyeSide::Unknown);
        assert_eq!(ds.entries().len(), 6);
        assert_eq!(ds.classes().len(), 3);
    }

    #[test]
    fn duplicate_rows_rejected() {
        let mut entries = vec![entry("a", EyeSide::Left, "x.pgm")];
        entries.push(entry("a", EyeSide::Left, "x.pgm"));
        assert!(matches!(
            Dataset::from_entries(PathBuf::from("."), entries),
            Err(Error::DuplicateEntry { .. })
        ));
    }

    #[test]
    fn mixed_sides_rejected() {
        let entries = vec![
            entry("a", EyeSide::Left, "x.pgm"),
            entry("a", EyeSide::Right, "y.pgm"),
        ];
        assert!(matches!(
            Dataset::from_entries(PathBuf::from("."), entries),
            Err(Error::MixedEyeSides { .. })
        ));
    }

    #[test]
    fn genuine_counts_follow_k_choose_2() {
        let ds = synthetic_dataset(4, 10, |_| EyeSide::Left);
        let pairs = ds.genuine_pairs();
        assert_eq!(pairs.len(), 4 * 45);

        let single = synthetic_dataset(3, 1, |_| EyeSide::Left);
        assert_eq!(single.genuine_pairs().len(), 0);
    }

    #[test]
    fn genuine_pairs_stay_within_class() {
        let ds = synthetic_dataset(3, 4, |_| EyeSide::Unknown);
        for &(a, b) in &ds.genuine_pairs().pairs {
            assert_ne!(a, b);
            assert_eq!(
                ds.entries()[a as usize].class_id,
                ds.entries()[b as usize].class_id
            );
        }
    }

    #[test]
    fn impostor_counts_per_side() {
        // 4 left + 3 right classes: 4*3 + 3*2 = 18 pairs
        let ds = synthetic_dataset(7, 2, |c| if c < 4 { EyeSide::Left } else { EyeSide::Right });
        let pairs = ds.impostor_pairs(1);
        assert_eq!(pairs.len(), 4 * 3 + 3 * 2);
        for &(a, b) in &pairs.pairs {
            let (ea, eb) = (&ds.entries()[a as usize], &ds.entries()[b as usize]);
            assert_ne!(ea.class_id, eb.class_id);
            assert_eq!(ea.eye_side, eb.eye_side);
        }
    }

    #[test]
    fn impostor_two_class_side_yields_two_pairs() {
        let ds = synthetic_dataset(2, 3, |_| EyeSide::Left);
        let pairs = ds.impostor_pairs(9);
        assert_eq!(pairs.len(), 2);
        // one pair references each direction of the loop
        let c0 = &ds.entries()[pairs.pairs[0].0 as usize].class_id;
        let c1 = &ds.entries()[pairs.pairs[1].0 as usize].class_id;
        assert_ne!(c0, c1);
    }

    #[test]
    fn impostor_unknown_side_is_one_group() {
        let ds = synthetic_dataset(5, 2, |_| EyeSide::Unknown);
        assert_eq!(ds.impostor_pairs(3).len(), 5 * 4);
    }

    #[test]
    fn impostor_is_pure_in_seed() {
        let ds = synthetic_dataset(6, 4, |c| if c % 2 == 0 { EyeSide::Left } else { EyeSide::Right });
        assert_eq!(ds.impostor_pairs(42), ds.impostor_pairs(42));
        assert_ne!(ds.impostor_pairs(42), ds.impostor_pairs(43));
    }

    #[test]
    fn single_class_side_produces_no_pairs() {
        let ds = synthetic_dataset(1, 5, |_| EyeSide::Left);
        assert!(ds.impostor_pairs(7).is_empty());
    }

    #[test]
    fn manifest_parser_validates() {
        assert!(parse_manifest("bad,header\n").is_err());
        assert!(parse_manifest("class_id,eye_side,image,mask\nc1,sideways,a,b\n").is_err());
        assert!(parse_manifest("class_id,eye_side,image,mask\n,left,a,b\n").is_err());
        let ok = parse_manifest("class_id,eye_side,image,mask\nc1,left,a.pgm,b.pgm\n").unwrap();
        assert_eq!(ok.len(), 1);
        assert_eq!(ok[0].eye_side, EyeSide::Left);
    }

    #[test]
    fn pairs_csv_roundtrip() {
        let ds = synthetic_dataset(3, 2, |_| EyeSide::Unknown);
        let pairs = ds.genuine_pairs();
        let csv = pairs.to_csv(&ds);
        let rows = parse_pairs_csv(&csv).unwrap();
        assert_eq!(rows.len(), pairs.len());
        assert!(rows.iter().all(|r| r.kind == PairKind::Genuine));
    }
}
