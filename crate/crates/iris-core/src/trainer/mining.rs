//! In-memory training data and batch-hard triplet mining.
//!
//! Batch generation samples `X` distinct classes (the set B), one anchor and
//! one distinct positive per class, then for each pair independently samples
//! `pool_size` candidate classes disjoint from B and keeps the candidate with
//! the smallest anchor-negative distance under the current weights. Weights
//! stay frozen for the whole batch. All draws come from a stream keyed by
//! (seed, batch counter) in a fixed order, so mining is a pure function of
//! (data, bank, seed, batch).

use rayon::prelude::*;

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::image::{NormalizedIris, OcclusionMask};
use crate::kernel::Kernel;
use crate::matcher::masked_distance;
use crate::rng::{domain, Stream};
use crate::trainer::points::TrainPoints;

/// One image with its mask, fully loaded.
pub struct LoadedImage {
    /// Manifest-relative path, used to resolve validation triplets and logs.
    pub rel_path: String,
    pub iris: NormalizedIris,
    pub mask: OcclusionMask,
}

pub struct LoadedClass {
    pub class_id: String,
    pub images: Vec<LoadedImage>,
}

/// A dataset with all pixels resident in memory, organized per class.
pub struct LoadedDataset {
    pub classes: Vec<LoadedClass>,
}

impl LoadedDataset {
    /// Load every image and mask of a dataset (parallel, order preserved).
    pub fn load(ds: &Dataset) -> Result<Self> {
        let images: Vec<Result<LoadedImage>> = (0..ds.entries().len())
            .into_par_iter()
            .map(|i| {
                Ok(LoadedImage {
                    rel_path: ds.entries()[i].image.clone(),
                    iris: ds.load_image(i)?,
                    mask: ds.load_mask(i)?,
                })
            })
            .collect();
        let mut loaded: Vec<LoadedImage> = images.into_iter().collect::<Result<_>>()?;
        let mut classes = Vec::with_capacity(ds.classes().len());
        // entries are sorted by class, so drain in class order
        for group in ds.classes().iter().rev() {
            let images: Vec<LoadedImage> = loaded.drain(group.start..group.end).collect();
            classes.push(LoadedClass {
                class_id: group.class_id.clone(),
                images,
            });
        }
        classes.reverse();
        Ok(LoadedDataset { classes })
    }

    pub fn total_images(&self) -> usize {
        self.classes.iter().map(|c| c.images.len()).sum()
    }

    /// Indices of classes with at least two images (anchor/positive capable).
    pub fn eligible_classes(&self) -> Vec<usize> {
        (0..self.classes.len())
            .filter(|&i| self.classes[i].images.len() >= 2)
            .collect()
    }

    pub fn image(&self, class: usize, img: usize) -> &LoadedImage {
        &self.classes[class].images[img]
    }

    /// Resolve a manifest-relative path to (class, image) indices.
    pub fn find_by_path(&self, rel_path: &str) -> Option<(usize, usize)> {
        for (ci, class) in self.classes.iter().enumerate() {
            for (ii, img) in class.images.iter().enumerate() {
                if img.rel_path == rel_path {
                    return Some((ci, ii));
                }
            }
        }
        None
    }
}

/// A mined training triplet: (class, image) references plus the sampled
/// combined masks of both pairs.
pub struct Triplet {
    pub anchor: (usize, usize),
    pub positive: (usize, usize),
    pub negative: (usize, usize),
    pub ap_mask: Vec<u8>,
    pub an_mask: Vec<u8>,
}

/// A mined batch plus the candidate pools that were actually evaluated,
/// kept for exhaustive argmin verification.
pub struct MinedBatch {
    pub triplets: Vec<Triplet>,
    pub candidate_pools: Vec<Vec<(usize, usize)>>,
}

/// Mine one batch of `x` triplets with batch-hard negative selection.
pub fn batch_hard_mine(
    kernels: &[Kernel],
    data: &LoadedDataset,
    x: usize,
    pool_size: usize,
    points: &TrainPoints,
    seed: u64,
    batch: u64,
) -> Result<Vec<Triplet>> {
    Ok(batch_hard_mine_detailed(kernels, data, x, pool_size, points, seed, batch)?.triplets)
}

/// Mining with the evaluated candidate pools exposed.
pub fn batch_hard_mine_detailed(
    kernels: &[Kernel],
    data: &LoadedDataset,
    x: usize,
    pool_size: usize,
    points: &TrainPoints,
    seed: u64,
    batch: u64,
) -> Result<MinedBatch> {
    assert!(x >= 1 && pool_size >= 1);
    let eligible = data.eligible_classes();
    if eligible.len() < x {
        return Err(Error::InsufficientClasses {
            needed: x,
            available: eligible.len(),
        });
    }
    if data.classes.len() < x + pool_size {
        return Err(Error::InsufficientClasses {
            needed: x + pool_size,
            available: data.classes.len(),
        });
    }

    let mut rng = Stream::keyed(seed, domain::MINING, &[batch]);

    // B: x distinct anchor/positive classes
    let b: Vec<usize> = rng
        .sample_distinct(eligible.len(), x)
        .into_iter()
        .map(|i| eligible[i])
        .collect();
    let in_b = {
        let mut flags = vec![false; data.classes.len()];
        for &c in &b {
            flags[c] = true;
        }
        flags
    };
    let complement: Vec<usize> = (0..data.classes.len()).filter(|&c| !in_b[c]).collect();

    // anchors and positives, one draw pair per class in B
    let mut pairs: Vec<((usize, usize), (usize, usize))> = Vec::with_capacity(x);
    for &class in &b {
        let k = data.classes[class].images.len();
        let anchor = rng.below(k);
        let mut positive = rng.below(k - 1);
        if positive >= anchor {
            positive += 1;
        }
        pairs.push(((class, anchor), (class, positive)));
    }

    // candidate negatives per pair: pool_size classes from the complement,
    // one image each; drawn before any distance evaluation
    let mut candidates: Vec<Vec<(usize, usize)>> = Vec::with_capacity(x);
    for _ in 0..x {
        let picks = rng.sample_distinct(complement.len(), pool_size);
        let mut row = Vec::with_capacity(pool_size);
        for p in picks {
            let class = complement[p];
            let img = rng.below(data.classes[class].images.len());
            row.push((class, img));
        }
        candidates.push(row);
    }

    // anchor features under the frozen weights
    let anchor_features: Vec<Vec<f64>> = pairs
        .par_iter()
        .map(|&((c, i), _)| points.features(data.image(c, i).iris.grid(), kernels))
        .collect::<Result<_>>()?;

    let select =
        |pair_idx: usize, cands: &[(usize, usize)]| -> Result<Option<((usize, usize), Vec<u8>)>> {
            let (ac, ai) = pairs[pair_idx].0;
            let anchor_mask = &data.image(ac, ai).mask;
            let scored: Vec<Option<(f64, Vec<u8>)>> = cands
                .par_iter()
                .map(|&(nc, ni)| {
                    let neg = data.image(nc, ni);
                    let an_mask = points.sampled_combined(anchor_mask, &neg.mask);
                    if an_mask.iter().all(|&m| m == 0) {
                        return Ok(None);
                    }
                    let f_neg = points.features(neg.iris.grid(), kernels)?;
                    let d = masked_distance(
                        &anchor_features[pair_idx],
                        &f_neg,
                        &an_mask,
                        &an_mask,
                    )?;
                    Ok(Some((d, an_mask)))
                })
                .collect::<Result<_>>()?;
            let mut best: Option<(usize, f64)> = None;
            for (ci, entry) in scored.iter().enumerate() {
                if let Some((d, _)) = entry {
                    // strict improvement keeps the lowest candidate index on ties
                    if best.map_or(true, |(_, bd)| *d < bd) {
                        best = Some((ci, *d));
                    }
                }
            }
            Ok(best.map(|(ci, _)| {
                let mask = scored[ci].as_ref().unwrap().1.clone();
                (cands[ci], mask)
            }))
        };

    let mut triplets = Vec::with_capacity(x);
    let mut used_pools = Vec::with_capacity(x);
    for pair_idx in 0..x {
        let (selected, pool) = match select(pair_idx, &candidates[pair_idx])? {
            Some(s) => (s, candidates[pair_idx].clone()),
            None => {
                // every candidate had an empty combined mask: resample B'
                // once from a deterministic per-pair stream, then give up
                let mut retry =
                    Stream::keyed(seed, domain::MINING, &[batch, 0x5245, pair_idx as u64]);
                let picks = retry.sample_distinct(complement.len(), pool_size);
                let row: Vec<(usize, usize)> = picks
                    .into_iter()
                    .map(|p| {
                        let class = complement[p];
                        (class, retry.below(data.classes[class].images.len()))
                    })
                    .collect();
                let s = select(pair_idx, &row)?.ok_or(Error::DegenerateTriplet)?;
                (s, row)
            }
        };
        let ((nc, ni), an_mask) = selected;
        let (anchor, positive) = pairs[pair_idx];
        let ap_mask = points.sampled_combined(
            &data.image(anchor.0, anchor.1).mask,
            &data.image(positive.0, positive.1).mask,
        );
        triplets.push(Triplet {
            anchor,
            positive,
            negative: (nc, ni),
            ap_mask,
            an_mask,
        });
        used_pools.push(pool);
    }
    Ok(MinedBatch {
        triplets,
        candidate_pools: used_pools,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;
    use crate::image::{IRIS_COLS, IRIS_ROWS};
    use crate::kernel::KernelBank;
    use crate::sampling::SamplingMap;

    fn tiny_dataset(classes: usize, per_class: usize) -> LoadedDataset {
        let mut out = Vec::new();
        for c in 0..classes {
            let mut images = Vec::new();
            for i in 0..per_class {
                let mut s = Stream::keyed(77, 0xDA7A, &[c as u64, i as u64]);
                let iris = NormalizedIris::new(Grid::from_fn(IRIS_ROWS, IRIS_COLS, |_, _| {
                    s.next_f64()
                }))
                .unwrap();
                images.push(LoadedImage {
                    rel_path: format!("c{}_{}.pgm", c, i),
                    iris,
                    mask: OcclusionMask::all_valid(),
                });
            }
            out.push(LoadedClass {
                class_id: format!("c{:03}", c),
                images,
            });
        }
        LoadedDataset { classes: out }
    }

    #[test]
    fn mining_respects_class_disjointness() {
        let data = tiny_dataset(10, 3);
        let bank = KernelBank::random_init(5, &crate::kernel::DEFAULT_SIZES).unwrap();
        let points = TrainPoints::from_map(&SamplingMap::default_grid());
        let triplets = batch_hard_mine(bank.kernels(), &data, 4, 4, &points, 11, 0).unwrap();
        assert_eq!(triplets.len(), 4);
        let b: Vec<usize> = triplets.iter().map(|t| t.anchor.0).collect();
        for t in &triplets {
            assert_eq!(t.anchor.0, t.positive.0);
            assert_ne!(t.anchor.1, t.positive.1);
            assert!(!b.contains(&t.negative.0), "negative class drawn from B");
        }
        // distinct anchor classes
        let mut sorted = b.clone();
        sorted.sort_unstable();
        sorted.dedup();
        assert_eq!(sorted.len(), 4);
    }

    #[test]
    fn mining_is_deterministic_in_seed_and_batch() {
        let data = tiny_dataset(8, 2);
        let bank = KernelBank::random_init(5, &crate::kernel::DEFAULT_SIZES).unwrap();
        let points = TrainPoints::from_map(&SamplingMap::default_grid());
        let a = batch_hard_mine(bank.kernels(), &data, 3, 3, &points, 7, 5).unwrap();
        let b = batch_hard_mine(bank.kernels(), &data, 3, 3, &points, 7, 5).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.anchor, y.anchor);
            assert_eq!(x.positive, y.positive);
            assert_eq!(x.negative, y.negative);
        }
        let c = batch_hard_mine(bank.kernels(), &data, 3, 3, &points, 7, 6).unwrap();
        let same = a.iter().zip(&c).all(|(x, y)| {
            x.anchor == y.anchor && x.positive == y.positive && x.negative == y.negative
        });
        assert!(!same, "different batch counter should change the draw");
    }

    #[test]
    fn pool_of_one_selects_the_single_candidate() {
        let data = tiny_dataset(5, 2);
        let bank = KernelBank::random_init(5, &crate::kernel::DEFAULT_SIZES).unwrap();
        let points = TrainPoints::from_map(&SamplingMap::default_grid());
        let triplets = batch_hard_mine(bank.kernels(), &data, 2, 1, &points, 3, 0).unwrap();
        assert_eq!(triplets.len(), 2);
    }

    /// Recompute d_an for one anchor/negative candidate from scratch.
    fn recompute_dan(
        data: &LoadedDataset,
        kernels: &[Kernel],
        points: &TrainPoints,
        anchor: (usize, usize),
        neg: (usize, usize),
    ) -> Option<f64> {
        let a = data.image(anchor.0, anchor.1);
        let n = data.image(neg.0, neg.1);
        let m = points.sampled_combined(&a.mask, &n.mask);
        if m.iter().all(|&x| x == 0) {
            return None;
        }
        let f_a = points.features(a.iris.grid(), kernels).unwrap();
        let f_n = points.features(n.iris.grid(), kernels).unwrap();
        Some(masked_distance(&f_a, &f_n, &m, &m).unwrap())
    }

    #[test]
    fn selected_negative_is_pool_argmin() {
        let data = tiny_dataset(12, 3);
        let bank = KernelBank::random_init(9, &crate::kernel::DEFAULT_SIZES).unwrap();
        let map = SamplingMap::default_grid();
        let points = TrainPoints::from_map(&map);
        for batch in 0..3 {
            let mined =
                batch_hard_mine_detailed(bank.kernels(), &data, 4, 5, &points, 21, batch).unwrap();
            for (t, pool) in mined.triplets.iter().zip(&mined.candidate_pools) {
                let d_selected =
                    recompute_dan(&data, bank.kernels(), &points, t.anchor, t.negative).unwrap();
                assert!(pool.contains(&t.negative));
                for &cand in pool {
                    if let Some(d) =
                        recompute_dan(&data, bank.kernels(), &points, t.anchor, cand)
                    {
                        assert!(
                            d_selected <= d,
                            "candidate {:?} beats selected {:?}",
                            cand,
                            t.negative
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn insufficient_classes_rejected() {
        let data = tiny_dataset(3, 2);
        let bank = KernelBank::random_init(5, &crate::kernel::DEFAULT_SIZES).unwrap();
        let points = TrainPoints::from_map(&SamplingMap::default_grid());
        assert!(matches!(
            batch_hard_mine(bank.kernels(), &data, 4, 1, &points, 0, 0),
            Err(Error::InsufficientClasses { .. })
        ));
        assert!(matches!(
            batch_hard_mine(bank.kernels(), &data, 2, 2, &points, 0, 0),
            Err(Error::InsufficientClasses { .. })
        ));
    }
}
