//! Persistent validation triplets: built once from the validation split,
//! serialized, and re-evaluated with the identical list throughout training.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::kernel::Kernel;
use crate::matcher::masked_distance;
use crate::rng::{domain, Stream};
use crate::trainer::loss::LossKind;
use crate::trainer::mining::LoadedDataset;
use crate::trainer::points::TrainPoints;

/// One validation triplet, identified by manifest-relative paths so the list
/// survives serialization.
#[derive(Debug, Clone, PartialEq)]
pub struct ValTriplet {
    pub anchor: String,
    pub positive: String,
    pub negative: String,
}

/// Resolved (class, image) indices into a loaded dataset.
pub struct ResolvedTriplet {
    pub anchor: (usize, usize),
    pub positive: (usize, usize),
    pub negative: (usize, usize),
}

/// Draw `count` random triplets (no mining) from the validation data.
/// Triplet `t` draws from a stream keyed by (seed, t); degenerate draws
/// (empty combined masks) are retried within the triplet's own stream.
pub fn build_validation_set(
    data: &LoadedDataset,
    points: &TrainPoints,
    count: usize,
    seed: u64,
) -> Result<Vec<ValTriplet>> {
    let eligible = data.eligible_classes();
    if eligible.is_empty() || data.classes.len() < 2 {
        return Err(Error::InsufficientClasses {
            needed: 2,
            available: data.classes.len(),
        });
    }
    (0..count)
        .map(|t| {
            let mut rng = Stream::keyed(seed, domain::VALIDATION, &[t as u64]);
            for _attempt in 0..1000 {
                let class = eligible[rng.below(eligible.len())];
                let k = data.classes[class].images.len();
                let anchor = rng.below(k);
                let mut positive = rng.below(k - 1);
                if positive >= anchor {
                    positive += 1;
                }
                let mut neg_class = rng.below(data.classes.len() - 1);
                if neg_class >= class {
                    neg_class += 1;
                }
                let neg_img = rng.below(data.classes[neg_class].images.len());

                let a = data.image(class, anchor);
                let p = data.image(class, positive);
                let n = data.image(neg_class, neg_img);
                let ap = points.sampled_combined(&a.mask, &p.mask);
                let an = points.sampled_combined(&a.mask, &n.mask);
                if ap.iter().any(|&m| m == 1) && an.iter().any(|&m| m == 1) {
                    return Ok(ValTriplet {
                        anchor: a.rel_path.clone(),
                        positive: p.rel_path.clone(),
                        negative: n.rel_path.clone(),
                    });
                }
            }
            Err(Error::DegenerateTriplet)
        })
        .collect()
}

pub fn save_validation_set(triplets: &[ValTriplet], path: &Path) -> Result<()> {
    let mut out = String::from("anchor,positive,negative\n");
    for t in triplets {
        out.push_str(&format!("{},{},{}\n", t.anchor, t.positive, t.negative));
    }
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn load_validation_set(path: &Path) -> Result<Vec<ValTriplet>> {
    let text = fs::read_to_string(path).map_err(|e| {
        if e.kind() == std::io::ErrorKind::NotFound {
            Error::MissingFile(path.to_path_buf())
        } else {
            Error::io(path, e)
        }
    })?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim_end();
        if line.is_empty() || (i == 0 && line == "anchor,positive,negative") {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 3 {
            return Err(Error::ManifestFormat {
                line: i + 1,
                detail: format!("expected 3 fields, got {}", fields.len()),
            });
        }
        out.push(ValTriplet {
            anchor: fields[0].to_string(),
            positive: fields[1].to_string(),
            negative: fields[2].to_string(),
        });
    }
    Ok(out)
}

/// Resolve path-based triplets against the loaded validation data.
pub fn resolve_triplets(
    data: &LoadedDataset,
    triplets: &[ValTriplet],
) -> Result<Vec<ResolvedTriplet>> {
    triplets
        .iter()
        .map(|t| {
            let find = |p: &str| {
                data.find_by_path(p)
                    .ok_or_else(|| Error::MissingCode(p.to_string()))
            };
            Ok(ResolvedTriplet {
                anchor: find(&t.anchor)?,
                positive: find(&t.positive)?,
                negative: find(&t.negative)?,
            })
        })
        .collect()
}

/// Mean loss over the persistent validation triplets under the given bank.
/// Each distinct image is encoded once per call.
pub fn validation_loss(
    kernels: &[Kernel],
    points: &TrainPoints,
    data: &LoadedDataset,
    triplets: &[ResolvedTriplet],
    loss: LossKind,
) -> Result<f64> {
    assert!(!triplets.is_empty());
    let mut distinct: Vec<(usize, usize)> = Vec::new();
    let mut index: HashMap<(usize, usize), usize> = HashMap::new();
    for t in triplets {
        for key in [t.anchor, t.positive, t.negative] {
            index.entry(key).or_insert_with(|| {
                distinct.push(key);
                distinct.len() - 1
            });
        }
    }
    let features: Vec<Vec<f64>> = distinct
        .par_iter()
        .map(|&(c, i)| points.features(data.image(c, i).iris.grid(), kernels))
        .collect::<Result<_>>()?;

    let losses: Vec<f64> = triplets
        .par_iter()
        .map(|t| {
            let f_a = &features[index[&t.anchor]];
            let f_p = &features[index[&t.positive]];
            let f_n = &features[index[&t.negative]];
            let a = data.image(t.anchor.0, t.anchor.1);
            let ap = points.sampled_combined(&a.mask, &data.image(t.positive.0, t.positive.1).mask);
            let an = points.sampled_combined(&a.mask, &data.image(t.negative.0, t.negative.1).mask);
            let d_ap = masked_distance(f_a, f_p, &ap, &ap)?;
            let d_an = masked_distance(f_a, f_n, &an, &an)?;
            Ok(loss.value(d_ap, d_an))
        })
        .collect::<Result<_>>()?;
    Ok(losses.iter().sum::<f64>() / losses.len() as f64)
}
