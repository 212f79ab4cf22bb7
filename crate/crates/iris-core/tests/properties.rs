//! Property tests for the spec-level invariants that hold on all inputs.

use proptest::prelude::*;

use iris_core::conv::{convolve_valid, sigmoid, wrap_pad};
use iris_core::dataset::{Dataset, EyeSide, ManifestEntry};
use iris_core::eval::roc_and_eer;
use iris_core::grid::Grid;
use iris_core::kernel::Kernel;
use iris_core::matcher::{hamming_distance, masked_distance};

fn entry(class: usize, side: EyeSide, img: usize) -> ManifestEntry {
    ManifestEntry {
        class_id: format!("c{:04}", class),
        eye_side: side,
        image: format!("i{:04}_{:02}.pgm", class, img),
        mask: format!("m{:04}_{:02}.pgm", class, img),
    }
}

fn dataset_from_sizes(sizes: &[(usize, u8)]) -> Dataset {
    let mut entries = Vec::new();
    for (class, &(count, side)) in sizes.iter().enumerate() {
        let side = match side % 3 {
            0 => EyeSide::Left,
            1 => EyeSide::Right,
            _ => EyeSide::Unknown,
        };
        for img in 0..count {
            entries.push(entry(class, side, img));
        }
    }
    Dataset::from_entries(std::path::PathBuf::from("."), entries).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// Genuine pairs number exactly sum k_i(k_i-1)/2; impostor pairs number
    /// exactly sum C_s(C_s-1) over eye sides, for any manifest shape.
    #[test]
    fn pair_count_formulas(sizes in prop::collection::vec((1usize..6, 0u8..3), 1..12), seed in any::<u64>()) {
        let ds = dataset_from_sizes(&sizes);
        let genuine = ds.genuine_pairs();
        let expect_genuine: usize = sizes.iter().map(|&(k, _)| k * (k - 1) / 2).sum();
        prop_assert_eq!(genuine.len(), expect_genuine);

        let impostor = ds.impostor_pairs(seed);
        let mut per_side = [0usize; 3];
        for &(_, side) in &sizes {
            per_side[(side % 3) as usize] += 1;
        }
        let expect_impostor: usize = per_side.iter().map(|&c| c * c.saturating_sub(1)).sum();
        prop_assert_eq!(impostor.len(), expect_impostor);

        // pure function of (manifest, seed)
        prop_assert_eq!(&impostor.pairs, &ds.impostor_pairs(seed).pairs);
    }

    /// Distance symmetry, range, and binary-path equivalence.
    #[test]
    fn masked_distance_invariants(
        bits1 in prop::collection::vec(0u8..2, 64),
        bits2 in prop::collection::vec(0u8..2, 64),
        m1 in prop::collection::vec(0u8..2, 64),
        m2 in prop::collection::vec(0u8..2, 64),
    ) {
        let f1: Vec<f64> = bits1.iter().map(|&b| f64::from(b)).collect();
        let f2: Vec<f64> = bits2.iter().map(|&b| f64::from(b)).collect();
        let real = masked_distance(&f1, &f2, &m1, &m2);
        let swapped = masked_distance(&f2, &f1, &m2, &m1);
        let int = hamming_distance(&bits1, &bits2, &m1, &m2);
        match (real, swapped, int) {
            (Ok(d), Ok(ds), Ok((di, valid))) => {
                prop_assert_eq!(d, ds);
                prop_assert_eq!(d, di);
                prop_assert!((0.0..=1.0).contains(&d));
                prop_assert!(valid > 0);
            }
            (Err(_), Err(_), Err(_)) => {} // consistent unscorable
            _ => prop_assert!(false, "paths disagree on scorability"),
        }
    }

    /// Zeroing one mask position removes exactly that term from numerator
    /// and denominator.
    #[test]
    fn mask_zeroing_consistency(
        vals1 in prop::collection::vec(0.0f64..1.0, 16),
        vals2 in prop::collection::vec(0.0f64..1.0, 16),
        kill in 0usize..16,
    ) {
        let ones = vec![1u8; 16];
        let full = masked_distance(&vals1, &vals2, &ones, &ones).unwrap();
        let mut cut_mask = ones.clone();
        cut_mask[kill] = 0;
        let cut = masked_distance(&vals1, &vals2, &cut_mask, &ones).unwrap();
        // recompute from the definition with the term removed
        let num: f64 = (0..16).filter(|&i| i != kill).map(|i| (vals1[i] - vals2[i]).abs()).sum();
        let expect = num / 15.0;
        prop_assert!((cut - expect).abs() < 1e-12);
        // removing a term moves the distance by at most the term's weight
        prop_assert!((cut - full).abs() <= 1.0 / 15.0 + 1e-12);
    }

    /// Toroidal padding formula at every border cell, any pad.
    #[test]
    fn wrap_pad_formula(rows in 2usize..8, cols in 2usize..10, pad_y in 0usize..4, pad_x in 0usize..4, seed in any::<u64>()) {
        prop_assume!(pad_y < rows && pad_x < cols);
        let mut s = iris_core::rng::Stream::new(seed);
        let img = Grid::from_fn(rows, cols, |_, _| s.next_f64());
        let padded = wrap_pad(&img, pad_y, pad_x).unwrap();
        prop_assert_eq!(padded.dims(), (rows + 2 * pad_y, cols + 2 * pad_x));
        for r in 0..padded.rows() {
            for c in 0..padded.cols() {
                let src = img.get((r + rows - pad_y % rows) % rows, (c + cols - pad_x % cols) % cols);
                prop_assert_eq!(padded.get(r, c), src);
            }
        }
    }

    /// Convolution equivariance to column rotation, exact.
    #[test]
    fn conv_column_shift_equivariance(seed in any::<u64>(), shift in -20i64..20) {
        let mut s = iris_core::rng::Stream::new(seed);
        let img = Grid::from_fn(8, 16, |_, _| s.next_f64());
        let k = Kernel::new(3, 5, (0..15).map(|_| s.range_f64(-1.0, 1.0)).collect()).unwrap();
        let conv = |g: &Grid| convolve_valid(&wrap_pad(g, 1, 2).unwrap(), &k).unwrap();
        prop_assert_eq!(conv(&img.shift_cols(shift)), conv(&img).shift_cols(shift));
    }

    /// Sigmoid stays strictly inside (0,1) over the response range reachable
    /// by bounded kernels on [0,1] pixels, and respects the reflection
    /// identity. (Beyond |x| ~ 36.7 the f64 value saturates exactly.)
    #[test]
    fn sigmoid_identity(x in -36.0f64..36.0) {
        let s = sigmoid(x);
        prop_assert!(s > 0.0 && s < 1.0);
        prop_assert!((s + sigmoid(-x) - 1.0).abs() < 1e-15);
    }

    /// Far outside that range it saturates without ever producing NaN.
    #[test]
    fn sigmoid_saturates_cleanly(x in prop::num::f64::NORMAL) {
        let s = sigmoid(x);
        prop_assert!(!s.is_nan());
        prop_assert!((0.0..=1.0).contains(&s));
    }

    /// Zero-mean normalization: sum below 1e-12 and idempotent up to
    /// rounding at the weight scale.
    #[test]
    fn zero_mean_properties(weights in prop::collection::vec(-10.0f64..10.0, 15)) {
        let scale = weights.iter().fold(1.0f64, |m, w| m.max(w.abs()));
        let k = Kernel::new(3, 5, weights).unwrap();
        let z = k.zero_mean();
        prop_assert!(z.sum().abs() <= 1e-12);
        let z2 = z.zero_mean();
        for (a, b) in z.weights().iter().zip(z2.weights()) {
            prop_assert!((a - b).abs() <= 1e-15 * scale);
        }
    }

    /// EER is in [0,1] and hits 0 exactly when the lists separate strictly
    /// under the accept-by-<= convention.
    #[test]
    fn eer_range_and_zero_condition(
        genuine in prop::collection::vec(0.0f64..1.0, 2..40),
        impostor in prop::collection::vec(0.0f64..1.0, 2..40),
    ) {
        let (roc, eer) = roc_and_eer(&genuine, &impostor).unwrap();
        prop_assert!((0.0..=1.0).contains(&eer));
        for w in roc.windows(2) {
            prop_assert!(w[1].fmr >= w[0].fmr);
            prop_assert!(w[1].fnmr <= w[0].fnmr);
        }
        let g_max = genuine.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let i_min = impostor.iter().copied().fold(f64::INFINITY, f64::min);
        if g_max < i_min {
            prop_assert_eq!(eer, 0.0);
        }
        if eer == 0.0 {
            prop_assert!(g_max < i_min);
        }
    }
}
