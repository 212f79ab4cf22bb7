//! Triplet loss functions: soft margin (softplus) and the classic hinge.

use serde::{Deserialize, Serialize};

/// Which loss the trainer optimizes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum LossKind {
    SoftMargin,
    Hinge { alpha: f64 },
}

/// Soft-margin triplet loss: log(1 + exp(d_ap - d_an)), evaluated in the
/// overflow-safe softplus form max(z,0) + log1p(exp(-|z|)).
pub fn soft_margin_loss(d_ap: f64, d_an: f64) -> f64 {
    let z = d_ap - d_an;
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

/// Hinge triplet loss: max(0, d_ap - d_an + alpha).
pub fn hinge_loss(d_ap: f64, d_an: f64, alpha: f64) -> f64 {
    (d_ap - d_an + alpha).max(0.0)
}

impl LossKind {
    pub fn value(&self, d_ap: f64, d_an: f64) -> f64 {
        match *self {
            LossKind::SoftMargin => soft_margin_loss(d_ap, d_an),
            LossKind::Hinge { alpha } => hinge_loss(d_ap, d_an, alpha),
        }
    }

    /// dLoss/d(d_ap - d_an); the gradient of d_an carries the opposite sign.
    pub fn coefficient(&self, d_ap: f64, d_an: f64) -> f64 {
        let z = d_ap - d_an;
        match *self {
            LossKind::SoftMargin => crate::conv::sigmoid(z),
            LossKind::Hinge { alpha } => {
                if z + alpha > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Stream;

    const LN_2: f64 = std::f64::consts::LN_2;

    #[test]
    fn soft_margin_anchor_values() {
        // frozen from independent high-precision evaluation
        assert!((soft_margin_loss(0.3, 0.3) - LN_2).abs() < 1e-15);
        assert!((soft_margin_loss(0.0, 1.0) - 0.31326168751822283).abs() < 1e-12);
        assert!((soft_margin_loss(1.0, 0.0) - 1.3132616875182228).abs() < 1e-12);
    }

    #[test]
    fn equal_distances_give_ln2_for_any_d() {
        let mut s = Stream::new(6);
        for _ in 0..100 {
            let d = s.range_f64(-5.0, 5.0);
            assert!((soft_margin_loss(d, d) - LN_2).abs() < 1e-12);
        }
    }

    #[test]
    fn soft_margin_is_positive_and_overflow_safe() {
        for (a, n) in [(0.0, 0.0), (700.0, 0.0), (0.0, 700.0), (-30.0, 40.0)] {
            let l = soft_margin_loss(a, n);
            assert!(l > 0.0 && l.is_finite(), "loss({}, {}) = {}", a, n, l);
        }
    }

    #[test]
    fn hinge_matches_closed_form() {
        assert_eq!(hinge_loss(0.2, 0.9, 0.3), 0.0);
        assert_eq!(hinge_loss(0.4, 0.4, 0.3), 0.3);
        assert!((hinge_loss(0.9, 0.2, 0.1) - 0.8).abs() < 1e-15);
        let mut s = Stream::new(7);
        for _ in 0..100 {
            let (a, n, alpha) = (s.next_f64(), s.next_f64(), s.next_f64());
            assert_eq!(hinge_loss(a, n, alpha), (a - n + alpha).max(0.0));
            assert!(hinge_loss(a, n, alpha) >= 0.0);
        }
    }

    #[test]
    fn coefficient_is_half_at_equal_distances() {
        assert_eq!(LossKind::SoftMargin.coefficient(0.4, 0.4), 0.5);
    }
}
