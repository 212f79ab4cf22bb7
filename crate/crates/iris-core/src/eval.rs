//! Score-distribution evaluation: decidability d', ROC curve, EER, and the
//! file exports (ROC CSV, histograms, text summary).

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::matcher::ScoredPair;

/// Genuine and impostor distance lists plus the count of excluded
/// (unscorable) comparisons.
#[derive(Debug, Clone, Default)]
pub struct ScoreSet {
    pub genuine: Vec<f64>,
    pub impostor: Vec<f64>,
    pub excluded_count: usize,
}

impl ScoreSet {
    pub fn from_scored(scored: &[ScoredPair], excluded_count: usize) -> Self {
        let mut set = ScoreSet {
            excluded_count,
            ..Default::default()
        };
        for s in scored {
            match s.kind {
                crate::dataset::PairKind::Genuine => set.genuine.push(s.result.distance),
                crate::dataset::PairKind::Impostor => set.impostor.push(s.result.distance),
            }
        }
        set
    }
}

/// One ROC sweep point: accept-if-distance<=threshold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RocPoint {
    pub fmr: f64,
    pub fnmr: f64,
    pub threshold: f64,
}

/// Evaluation summary over one score set.
#[derive(Debug, Clone)]
pub struct EvalReport {
    pub d_prime: f64,
    pub eer: f64,
    pub roc: Vec<RocPoint>,
    pub genuine_hist: Vec<u64>,
    pub impostor_hist: Vec<u64>,
    pub genuine_count: usize,
    pub impostor_count: usize,
    pub excluded_count: usize,
}

pub const HIST_BINS: usize = 100;

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn sample_var(xs: &[f64], m: f64) -> f64 {
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64
}

/// Decidability d' = |mu_i - mu_g| / sqrt((var_g + var_i) / 2), with sample
/// variances. Perfect separation with zero variance reports +inf; the fully
/// degenerate equal-mean zero-variance case is defined as 0.
pub fn decidability(genuine: &[f64], impostor: &[f64]) -> Result<f64> {
    if genuine.len() < 2 || impostor.len() < 2 {
        return Err(Error::InsufficientScores(format!(
            "decidability needs >=2 scores per list, got {} genuine / {} impostor",
            genuine.len(),
            impostor.len()
        )));
    }
    let mg = mean(genuine);
    let mi = mean(impostor);
    let pooled = (sample_var(genuine, mg) + sample_var(impostor, mi)) / 2.0;
    let sep = (mi - mg).abs();
    if pooled == 0.0 {
        return Ok(if sep == 0.0 { 0.0 } else { f64::INFINITY });
    }
    Ok(sep / pooled.sqrt())
}

/// ROC sweep over the union of observed scores plus a reject-all sentinel,
/// and the EER linearly interpolated between the bracketing sweep points.
pub fn roc_and_eer(genuine: &[f64], impostor: &[f64]) -> Result<(Vec<RocPoint>, f64)> {
    if genuine.is_empty() || impostor.is_empty() {
        return Err(Error::InsufficientScores(
            "roc needs nonempty genuine and impostor lists".into(),
        ));
    }
    let mut thresholds: Vec<f64> = genuine.iter().chain(impostor).copied().collect();
    thresholds.sort_by(f64::total_cmp);
    thresholds.dedup();

    let mut gs = genuine.to_vec();
    let mut is = impostor.to_vec();
    gs.sort_by(f64::total_cmp);
    is.sort_by(f64::total_cmp);

    // count of scores <= t via sorted prefix
    let count_le = |sorted: &[f64], t: f64| -> usize { sorted.partition_point(|&x| x <= t) };

    // sentinel below every distance: accepts nothing (fmr 0, fnmr 1)
    let mut roc = Vec::with_capacity(thresholds.len() + 1);
    roc.push(RocPoint {
        fmr: 0.0,
        fnmr: 1.0,
        threshold: thresholds[0] - 1.0,
    });
    for &t in &thresholds {
        let fmr = count_le(&is, t) as f64 / is.len() as f64;
        let fnmr = 1.0 - count_le(&gs, t) as f64 / gs.len() as f64;
        roc.push(RocPoint {
            fmr,
            fnmr,
            threshold: t,
        });
    }

    // fmr - fnmr is non-decreasing along the sweep; find the sign change
    let mut eer = None;
    for w in roc.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        let d0 = lo.fmr - lo.fnmr;
        let d1 = hi.fmr - hi.fnmr;
        if d1 >= 0.0 {
            if d1 == 0.0 {
                eer = Some(hi.fmr);
            } else if d0 == 0.0 {
                eer = Some(lo.fmr);
            } else {
                // interpolate the crossing of two linear segments in t
                let theta = -d0 / (d1 - d0);
                eer = Some(lo.fmr + theta * (hi.fmr - lo.fmr));
            }
            break;
        }
    }
    // d1 >= 0 must occur: the last point has fnmr 0
    let eer = eer.expect("roc sweep always crosses fmr >= fnmr");
    Ok((roc, eer))
}

fn histogram(xs: &[f64]) -> Vec<u64> {
    let mut bins = vec![0u64; HIST_BINS];
    for &x in xs {
        let idx = ((x * HIST_BINS as f64) as usize).min(HIST_BINS - 1);
        bins[idx] += 1;
    }
    bins
}

/// Assemble the full report for a score set.
pub fn evaluate(scores: &ScoreSet) -> Result<EvalReport> {
    let (roc, eer) = roc_and_eer(&scores.genuine, &scores.impostor)?;
    let d_prime = decidability(&scores.genuine, &scores.impostor)?;
    Ok(EvalReport {
        d_prime,
        eer,
        roc,
        genuine_hist: histogram(&scores.genuine),
        impostor_hist: histogram(&scores.impostor),
        genuine_count: scores.genuine.len(),
        impostor_count: scores.impostor.len(),
        excluded_count: scores.excluded_count,
    })
}

/// Write `roc.csv`, `hist_genuine.csv`, `hist_impostor.csv`, `summary.txt`.
pub fn export_report(report: &EvalReport, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;

    let mut roc = String::from("fmr,fnmr,threshold\n");
    for p in &report.roc {
        roc.push_str(&format!("{},{},{}\n", p.fmr, p.fnmr, p.threshold));
    }
    let roc_path = dir.join("roc.csv");
    fs::write(&roc_path, roc).map_err(|e| Error::io(&roc_path, e))?;

    for (name, hist) in [
        ("hist_genuine.csv", &report.genuine_hist),
        ("hist_impostor.csv", &report.impostor_hist),
    ] {
        let mut out = String::from("bin_low,bin_high,count\n");
        for (i, count) in hist.iter().enumerate() {
            out.push_str(&format!(
                "{},{},{}\n",
                i as f64 / HIST_BINS as f64,
                (i + 1) as f64 / HIST_BINS as f64,
                count
            ));
        }
        let path = dir.join(name);
        fs::write(&path, out).map_err(|e| Error::io(&path, e))?;
    }

    let summary = format!(
        "genuine_scores: {}\nimpostor_scores: {}\nexcluded_pairs: {}\nd_prime: {}\neer: {}\n",
        report.genuine_count, report.impostor_count, report.excluded_count, report.d_prime, report.eer
    );
    let sum_path = dir.join("summary.txt");
    fs::write(&sum_path, summary).map_err(|e| Error::io(&sum_path, e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Stream;

    /// Independent brute-force oracle: direct counting at each threshold and
    /// the same segmentwise interpolation, written against the definition
    /// rather than the sweep implementation.
    pub(crate) fn eer_oracle(genuine: &[f64], impostor: &[f64]) -> f64 {
        let mut ts: Vec<f64> = genuine.iter().chain(impostor).copied().collect();
        ts.sort_by(f64::total_cmp);
        ts.dedup();
        let rate = |t: f64| -> (f64, f64) {
            let fm = impostor.iter().filter(|&&x| x <= t).count() as f64 / impostor.len() as f64;
            let fn_ = genuine.iter().filter(|&&x| x > t).count() as f64 / genuine.len() as f64;
            (fm, fn_)
        };
        let mut prev = (0.0, 1.0);
        for &t in &ts {
            let cur = rate(t);
            let d0 = prev.0 - prev.1;
            let d1 = cur.0 - cur.1;
            if d1 >= 0.0 {
                if d1 == 0.0 {
                    return cur.0;
                }
                if d0 == 0.0 {
                    return prev.0;
                }
                let theta = -d0 / (d1 - d0);
                return prev.0 + theta * (cur.0 - prev.0);
            }
            prev = cur;
        }
        unreachable!("sweep must cross")
    }

    #[test]
    fn identical_distributions_give_zero_dprime_and_half_eer() {
        let xs: Vec<f64> = (0..20).map(|i| i as f64 / 20.0).collect();
        assert_eq!(decidability(&xs, &xs).unwrap(), 0.0);
        let (_, eer) = roc_and_eer(&xs, &xs).unwrap();
        assert!((eer - 0.5).abs() < 1e-12, "eer {}", eer);
    }

    #[test]
    fn perfect_separation() {
        let g = vec![0.1, 0.15, 0.2];
        let i = vec![0.5, 0.6, 0.7];
        let (_, eer) = roc_and_eer(&g, &i).unwrap();
        assert_eq!(eer, 0.0);
        // zero-variance perfect separation reports +inf
        assert_eq!(
            decidability(&[0.0, 0.0], &[1.0, 1.0]).unwrap(),
            f64::INFINITY
        );
        // zero-variance equal means defined as 0
        assert_eq!(decidability(&[0.3, 0.3], &[0.3, 0.3]).unwrap(), 0.0);
    }

    #[test]
    fn fixed_lists_match_frozen_dprime() {
        let g = [0.10, 0.15, 0.20, 0.25, 0.30, 0.20, 0.18, 0.22, 0.16, 0.24];
        let i = [0.40, 0.45, 0.50, 0.55, 0.60, 0.50, 0.48, 0.52, 0.46, 0.54];
        // frozen from independent high-precision evaluation of the formula
        let expected = 5.2849819756323315;
        assert!((decidability(&g, &i).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn dprime_invariances() {
        let mut s = Stream::new(4);
        let g: Vec<f64> = (0..40).map(|_| s.range_f64(0.1, 0.4)).collect();
        let i: Vec<f64> = (0..40).map(|_| s.range_f64(0.4, 0.8)).collect();
        let base = decidability(&g, &i).unwrap();

        let shift = |xs: &[f64]| -> Vec<f64> { xs.iter().map(|x| x + 0.13).collect() };
        let scaled = |xs: &[f64], c: f64| -> Vec<f64> { xs.iter().map(|x| x * c).collect() };

        let d_shift = decidability(&shift(&g), &shift(&i)).unwrap();
        assert!((d_shift - base).abs() < 1e-10);

        let c = 2.5;
        let d_scaled = decidability(&scaled(&g, c), &scaled(&i, c)).unwrap();
        assert!((d_scaled - base).abs() < 1e-10, "scaling should cancel");
    }

    #[test]
    fn eer_matches_brute_force_oracle() {
        let mut s = Stream::new(9);
        for case in 0..50 {
            let g: Vec<f64> = (0..50).map(|_| s.range_f64(0.0, 0.6)).collect();
            let i: Vec<f64> = (0..50).map(|_| s.range_f64(0.3, 1.0)).collect();
            let (_, eer) = roc_and_eer(&g, &i).unwrap();
            let oracle = eer_oracle(&g, &i);
            assert!((eer - oracle).abs() < 1e-9, "case {}: {} vs {}", case, eer, oracle);
            assert!((0.0..=1.0).contains(&eer));
        }
    }

    #[test]
    fn roc_is_monotone() {
        let mut s = Stream::new(14);
        let g: Vec<f64> = (0..100).map(|_| s.range_f64(0.0, 0.7)).collect();
        let i: Vec<f64> = (0..100).map(|_| s.range_f64(0.2, 1.0)).collect();
        let (roc, _) = roc_and_eer(&g, &i).unwrap();
        for w in roc.windows(2) {
            assert!(w[1].fmr >= w[0].fmr);
            assert!(w[1].fnmr <= w[0].fnmr);
        }
    }

    #[test]
    fn histogram_conserves_counts() {
        let mut s = Stream::new(21);
        let xs: Vec<f64> = (0..137).map(|_| s.next_f64()).collect();
        let h = histogram(&xs);
        assert_eq!(h.iter().sum::<u64>(), 137);
        // boundary value 1.0 lands in the last bin
        assert_eq!(histogram(&[1.0])[HIST_BINS - 1], 1);
    }

    #[test]
    fn export_roundtrip_and_refusals() {
        let dir = tempfile::tempdir().unwrap();
        let scores = ScoreSet {
            genuine: vec![0.1, 0.2, 0.15, 0.22],
            impostor: vec![0.5, 0.6, 0.45, 0.52],
            excluded_count: 3,
        };
        let report = evaluate(&scores).unwrap();
        export_report(&report, dir.path()).unwrap();

        let roc_text = std::fs::read_to_string(dir.path().join("roc.csv")).unwrap();
        let parsed: Vec<RocPoint> = roc_text
            .lines()
            .skip(1)
            .map(|l| {
                let f: Vec<f64> = l.split(',').map(|t| t.parse().unwrap()).collect();
                RocPoint {
                    fmr: f[0],
                    fnmr: f[1],
                    threshold: f[2],
                }
            })
            .collect();
        assert_eq!(parsed, report.roc);

        let hist = std::fs::read_to_string(dir.path().join("hist_genuine.csv")).unwrap();
        let total: u64 = hist
            .lines()
            .skip(1)
            .map(|l| l.rsplit(',').next().unwrap().parse::<u64>().unwrap())
            .sum();
        assert_eq!(total, 4);

        let summary = std::fs::read_to_string(dir.path().join("summary.txt")).unwrap();
        assert!(summary.contains("excluded_pairs: 3"));

        // empty impostor list refuses with a clear error
        let empty = ScoreSet {
            genuine: vec![0.1, 0.2],
            impostor: vec![],
            excluded_count: 0,
        };
        assert!(matches!(
            evaluate(&empty),
            Err(Error::InsufficientScores(_))
        ));
    }
}
