//! Mask-weighted fractional distance between codes or feature vectors, with
//! optional column-shift search for rotation compensation.
//!
//! For vectors s1, s2 with masks m1, m2 the distance is
//! `sum(|s1-s2| * m1 * m2) / sum(m1 * m2)`; on binary inputs this is exactly
//! the fractional Hamming distance over jointly valid bits.

use std::collections::HashMap;

use rayon::prelude::*;

use crate::coder::IrisCode;
use crate::dataset::{PairKind, PairRow};
use crate::error::{Error, Result};
use crate::sampling::SamplingMap;

/// Outcome of one scored comparison.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatchResult {
    /// Fractional distance in [0,1].
    pub distance: f64,
    /// Number of jointly valid bits the distance was computed over.
    pub valid_bits: u32,
    /// Column shift (in sampled grid columns) that minimized the distance.
    pub shift_used: i32,
}

/// Mask-weighted fractional distance over real-valued or binary vectors.
/// Errors with [`Error::UnscorableComparison`] when no bit is valid in both.
pub fn masked_distance(s1: &[f64], s2: &[f64], m1: &[u8], m2: &[u8]) -> Result<f64> {
    assert_eq!(s1.len(), s2.len());
    assert_eq!(s1.len(), m1.len());
    assert_eq!(s1.len(), m2.len());
    let mut num = 0.0;
    let mut den = 0.0f64;
    for i in 0..s1.len() {
        let m = f64::from(m1[i] & m2[i]);
        num += (s1[i] - s2[i]).abs() * m;
        den += m;
    }
    if den == 0.0 {
        return Err(Error::UnscorableComparison);
    }
    Ok(num / den)
}

/// Integer-exact fractional Hamming distance on binary codes.
/// Returns (distance, jointly valid bit count).
pub fn hamming_distance(b1: &[u8], b2: &[u8], m1: &[u8], m2: &[u8]) -> Result<(f64, u32)> {
    assert_eq!(b1.len(), b2.len());
    assert_eq!(b1.len(), m1.len());
    assert_eq!(b1.len(), m2.len());
    let mut mismatches = 0u32;
    let mut valid = 0u32;
    for i in 0..b1.len() {
        let m = m1[i] & m2[i];
        valid += u32::from(m);
        mismatches += u32::from(m & (b1[i] ^ b2[i]));
    }
    if valid == 0 {
        return Err(Error::UnscorableComparison);
    }
    Ok((f64::from(mismatches) / f64::from(valid), valid))
}

fn permuted(bits: &[u8], perm: &[usize]) -> Vec<u8> {
    perm.iter().map(|&i| bits[i]).collect()
}

/// Match two codes, searching column shifts of `c2` in
/// [-max_shift, +max_shift] sampled-grid columns and keeping the minimum
/// distance. Ties prefer the smallest |shift|, then the negative one.
///
/// Shifting permutes sampled columns, so a grid-structured shared map is
/// required whenever `max_shift > 0`.
pub fn match_codes(
    c1: &IrisCode,
    c2: &IrisCode,
    max_shift: usize,
    map: &SamplingMap,
) -> Result<MatchResult> {
    if max_shift == 0 {
        let (distance, valid_bits) =
            hamming_distance(&c1.bits, &c2.bits, &c1.mask_bits, &c2.mask_bits)?;
        return Ok(MatchResult {
            distance,
            valid_bits,
            shift_used: 0,
        });
    }
    let structure = map.grid_structure().ok_or(Error::ShiftUnsupported)?;
    let points = map.shared_points().ok_or(Error::ShiftUnsupported)?;

    // shift order: 0, -1, +1, -2, +2, ... so the first strict minimum
    // realizes the tie-break (smallest magnitude, negative first)
    let mut shift_order = vec![0i64];
    for s in 1..=max_shift as i64 {
        shift_order.push(-s);
        shift_order.push(s);
    }

    let mut best: Option<MatchResult> = None;
    for &shift in &shift_order {
        let point_perm = structure.shift_permutation(points, shift);
        // the per-map block layout repeats the same permutation in each block
        let n_maps = c1.bits.len() / points.len();
        let mut perm = Vec::with_capacity(c1.bits.len());
        for m in 0..n_maps {
            let base = m * points.len();
            perm.extend(point_perm.iter().map(|&i| base + i));
        }
        let bits2 = permuted(&c2.bits, &perm);
        let mask2 = permuted(&c2.mask_bits, &perm);
        match hamming_distance(&c1.bits, &bits2, &c1.mask_bits, &mask2) {
            Ok((distance, valid_bits)) => {
                let better = match &best {
                    None => true,
                    Some(b) => distance < b.distance,
                };
                if better {
                    best = Some(MatchResult {
                        distance,
                        valid_bits,
                        shift_used: shift as i32,
                    });
                }
            }
            Err(Error::UnscorableComparison) => continue,
            Err(e) => return Err(e),
        }
    }
    best.ok_or(Error::UnscorableComparison)
}

/// One pair scored against the code table.
#[derive(Debug, Clone)]
pub struct ScoredPair {
    pub path_a: String,
    pub path_b: String,
    pub kind: PairKind,
    pub result: MatchResult,
}

/// Score every pair; unscorable pairs are excluded and counted. Output order
/// follows the input pair order regardless of thread count.
pub fn score_pairs(
    pairs: &[PairRow],
    codes: &HashMap<String, IrisCode>,
    max_shift: usize,
    map: &SamplingMap,
) -> Result<(Vec<ScoredPair>, usize)> {
    for row in pairs {
        for p in [&row.path_a, &row.path_b] {
            if !codes.contains_key(p.as_str()) {
                return Err(Error::MissingCode(p.clone()));
            }
        }
    }
    let results: Vec<Result<Option<ScoredPair>>> = pairs
        .par_iter()
        .map(|row| {
            let c1 = &codes[row.path_a.as_str()];
            let c2 = &codes[row.path_b.as_str()];
            match match_codes(c1, c2, max_shift, map) {
                Ok(result) => Ok(Some(ScoredPair {
                    path_a: row.path_a.clone(),
                    path_b: row.path_b.clone(),
                    kind: row.kind,
                    result,
                })),
                Err(Error::UnscorableComparison) => Ok(None),
                Err(e) => Err(e),
            }
        })
        .collect();
    let mut scored = Vec::with_capacity(pairs.len());
    let mut excluded = 0usize;
    for r in results {
        match r? {
            Some(s) => scored.push(s),
            None => excluded += 1,
        }
    }
    Ok((scored, excluded))
}

/// Render scored pairs as CSV `path_a,path_b,kind,distance,valid_bits,shift`.
pub fn scores_to_csv(scored: &[ScoredPair]) -> String {
    let mut out = String::from("path_a,path_b,kind,distance,valid_bits,shift\n");
    for s in scored {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            s.path_a,
            s.path_b,
            s.kind.as_str(),
            s.result.distance,
            s.result.valid_bits,
            s.result.shift_used
        ));
    }
    out
}

/// Parse a scores CSV back into (kind, distance) rows.
pub fn parse_scores_csv(text: &str) -> Result<Vec<(PairKind, f64)>> {
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim_end();
        if line.is_empty() || (i == 0 && line.starts_with("path_a,")) {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 6 {
            return Err(Error::ManifestFormat {
                line: i + 1,
                detail: format!("expected 6 fields, got {}", fields.len()),
            });
        }
        let kind = PairKind::parse(fields[2]).ok_or_else(|| Error::ManifestFormat {
            line: i + 1,
            detail: format!("unknown kind '{}'", fields[2]),
        })?;
        let distance: f64 = fields[3].parse().map_err(|_| Error::ManifestFormat {
            line: i + 1,
            detail: format!("bad distance '{}'", fields[3]),
        })?;
        rows.push((kind, distance));
    }
    Ok(rows)
}
