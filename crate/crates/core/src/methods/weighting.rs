use serde::{Deserialize, Serialize};

use crate::adversarial::PropensityScores;
use crate::error::{Error, Result};

pub const DEFAULT_P_MAX: f64 = 0.95;

/// Weights below this count as near zero in [`WeightVector::near_zero_share`].
pub const NEAR_ZERO_WEIGHT: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightVector {
    pub weights: Vec<f64>,
    pub p_max: f64,
    pub effective_sample_size: f64,
    pub min: f64,
    pub max: f64,
    /// Rows whose propensity was capped at `p_max`.
    pub n_trimmed: usize,
    /// Fraction of rows with weight below [`NEAR_ZERO_WEIGHT`].
    pub near_zero_share: f64,
}

impl WeightVector {
    pub fn mostly_near_zero(&self) -> bool {
        self.near_zero_share > 0.5
    }
}

/// Odds of the propensity capped at `p_max`.
pub fn ipw_weight(p: f64, p_max: f64) -> f64 {
    let p = p.min(p_max);
    p / (1.0 - p)
}

/// Inverse-propensity weights for the training rows.
pub fn ipw_weights(ps: &PropensityScores, p_max: f64) -> Result<WeightVector> {
    if !(p_max > 0.0 && p_max < 1.0) {
        return Err(Error::InvalidParameter(format!("p_max {p_max} outside (0, 1)")));
    }
    if ps.train_scores.is_empty() {
        return Err(Error::EmptyData("no train propensity scores"));
    }
    if ps.train_scores.iter().any(|p| !(0.0..=1.0).contains(p)) {
        return Err(Error::InvalidParameter("propensity scores must lie in [0, 1]".into()));
    }
    let weights: Vec<f64> = ps.train_scores.iter().map(|&p| ipw_weight(p, p_max)).collect();
    let sum: f64 = weights.iter().sum();
    let sum_sq: f64 = weights.iter().map(|w| w * w).sum();
    let n = weights.len() as f64;
    let near_zero_share = weights.iter().filter(|&&w| w < NEAR_ZERO_WEIGHT).count() as f64 / n;
    let wv = WeightVector {
        effective_sample_size: if sum_sq > 0.0 { sum * sum / sum_sq } else { 0.0 },
        min: weights.iter().copied().fold(f64::INFINITY, f64::min),
        max: weights.iter().copied().fold(0.0, f64::max),
        n_trimmed: ps.train_scores.iter().filter(|&&p| p > p_max).count(),
        near_zero_share,
        p_max,
        weights,
    };
    if wv.mostly_near_zero() {
        log::warn!(
            "{:.0}% of training weights are near zero; the weighted fit sees few rows",
            100.0 * near_zero_share
        );
    }
    Ok(wv)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn scores(p: Vec<f64>) -> PropensityScores {
        PropensityScores {
            train_scores: p,
            test_scores: vec![0.5],
            cv_auc: 0.5,
            fold_aucs: Vec::new(),
            folds: 5,
        }
    }

    #[test]
    fn formula_examples() {
        assert_eq!(ipw_weight(0.5, 0.95), 1.0);
        assert!((ipw_weight(0.8, 0.95) - 4.0).abs() < 1e-12);
        assert!((ipw_weight(0.99, 0.95) - 19.0).abs() < 1e-12);
        assert_eq!(ipw_weight(0.0, 0.95), 0.0);
    }

    #[test]
    fn summary_fields() {
        let w = ipw_weights(&scores(vec![0.5, 0.5, 0.99, 0.0]), 0.95).unwrap();
        assert_eq!(w.n_trimmed, 1);
        assert_eq!(w.min, 0.0);
        assert!((w.max - 19.0).abs() < 1e-12);
        let (s, s2) = (21.0f64, 1.0 + 1.0 + 19.0 * 19.0);
        assert!((w.effective_sample_size - s * s / s2).abs() < 1e-9);
        assert_eq!(w.near_zero_share, 0.25);
        assert!(!w.mostly_near_zero());
        assert!(ipw_weights(&scores(vec![0.0, 0.0, 0.1]), 0.95).unwrap().mostly_near_zero());
    }

    #[test]
    fn bad_inputs() {
        assert!(ipw_weights(&scores(vec![0.5]), 1.0).is_err());
        assert!(ipw_weights(&scores(vec![]), 0.95).is_err());
        assert!(ipw_weights(&scores(vec![1.5]), 0.95).is_err());
    }

    proptest! {
        #[test]
        fn monotone_and_bounded(mut p in prop::collection::vec(0.0f64..=1.0, 1..50), p_max in 0.5f64..0.99) {
            p.sort_by(f64::total_cmp);
            let w = ipw_weights(&scores(p), p_max).unwrap();
            for pair in w.weights.windows(2) {
                prop_assert!(pair[0] <= pair[1]);
            }
            prop_assert!(w.weights.iter().all(|v| v.is_finite() && *v >= 0.0));
            prop_assert!(w.max <= p_max / (1.0 - p_max));
            prop_assert!(w.effective_sample_size <= w.weights.len() as f64 + 1e-9);
        }
    }
}
