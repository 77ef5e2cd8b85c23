//! Ranking and balance metrics.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};

/// |SMD| below this counts as balanced.
pub const BALANCE_THRESHOLD: f64 = 0.1;

/// ROC AUC as the Mann–Whitney statistic, `(wins + 0.5 * ties) / (n1 * n0)`,
/// where label 1 is the positive class.
pub fn auc(scores: &[f64], labels: &[u8]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::LengthMismatch(format!(
            "{} scores for {} labels",
            scores.len(),
            labels.len()
        )));
    }
    let n_pos = labels.iter().filter(|&&l| l == 1).count() as u64;
    let n_neg = labels.len() as u64 - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::SingleClass);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));

    // twice the Mann-Whitney U, so ties stay integral
    let mut twice_u: u64 = 0;
    let mut neg_below: u64 = 0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        let (mut pos, mut neg) = (0u64, 0u64);
        while j < order.len() && scores[order[j]].total_cmp(&scores[order[i]]).is_eq() {
            if labels[order[j]] == 1 {
                pos += 1;
            } else {
                neg += 1;
            }
            j += 1;
        }
        twice_u += 2 * pos * neg_below + pos * neg;
        neg_below += neg;
        i = j;
    }
    Ok(twice_u as f64 / 2.0 / (n_pos as f64 * n_neg as f64))
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample variance with the n−1 denominator; 0 for fewer than two values.
pub fn sample_variance(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    if xs.iter().all(|&x| x == xs[0]) {
        return 0.0;
    }
    let m = mean(xs);
    xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64
}

/// Standardized mean difference between a matched sample and the test sample.
///
/// Zero pooled variance gives 0 when the means agree and `+inf` otherwise.
pub fn smd(x_match: &[f64], x_test: &[f64]) -> Result<f64> {
    if x_match.is_empty() || x_test.is_empty() {
        return Err(Error::EmptyData("smd needs two nonempty samples"));
    }
    let diff = mean(x_match) - mean(x_test);
    let pooled = ((sample_variance(x_match) + sample_variance(x_test)) / 2.0).sqrt();
    if pooled == 0.0 {
        return Ok(if diff == 0.0 { 0.0 } else { f64::INFINITY });
    }
    Ok(diff / pooled)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BalanceRow {
    pub feature: String,
    #[serde(with = "crate::report::float_sentinel")]
    pub smd: f64,
    pub balanced: bool,
}

impl BalanceRow {
    pub fn new(feature: impl Into<String>, smd: f64) -> Self {
        Self::with_limit(feature, smd, BALANCE_THRESHOLD)
    }

    pub fn with_limit(feature: impl Into<String>, smd: f64, limit: f64) -> Self {
        BalanceRow {
            feature: feature.into(),
            smd,
            balanced: smd.abs() < limit,
        }
    }
}

/// Mean and Student-t confidence half-width at `level` (e.g. 0.95).
pub fn mean_ci(values: &[f64], level: f64) -> Result<(f64, f64)> {
    if values.len() < 2 {
        return Err(Error::TooFewValues {
            needed: 2,
            got: values.len(),
        });
    }
    if !(0.0..1.0).contains(&level) {
        return Err(Error::InvalidParameter(format!("confidence level {level}")));
    }
    let n = values.len() as f64;
    let m = mean(values);
    let sd = sample_variance(values).sqrt();
    let t = StudentsT::new(0.0, 1.0, n - 1.0)
        .expect("df >= 1")
        .inverse_cdf(0.5 + level / 2.0);
    Ok((m, t * sd / n.sqrt()))
}

/// Weighted binary log-loss of probabilities against labels.
pub fn log_loss(probs: &[f64], labels: &[u8], weights: Option<&[f64]>) -> f64 {
    const EPS: f64 = 1e-15;
    let mut total = 0.0;
    let mut wsum = 0.0;
    for (i, (&p, &y)) in probs.iter().zip(labels).enumerate() {
        let w = weights.map_or(1.0, |w| w[i]);
        let p = p.clamp(EPS, 1.0 - EPS);
        total -= w * if y == 1 { p.ln() } else { (1.0 - p).ln() };
        wsum += w;
    }
    total / wsum
}
