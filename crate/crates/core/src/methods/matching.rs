use std::collections::BTreeSet;

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::adversarial::PropensityScores;
use crate::data::EncodedMatrix;
use crate::error::{Error, Result};
use crate::metrics::{sample_variance, mean, smd, BalanceRow, BALANCE_THRESHOLD};
use crate::rng;

/// Name of the balance row for the propensity score itself.
pub const PROPENSITY_ROW: &str = "propensity";

const LOGIT_CLIP: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MatchConfig {
    /// Validation size as a fraction of the training rows.
    pub target_frac: f64,
    /// Caliper in standard deviations of logit(p).
    pub caliper_mult: f64,
    pub smd_limit: f64,
}

impl Default for MatchConfig {
    fn default() -> Self {
        MatchConfig {
            target_frac: 0.2,
            caliper_mult: 0.2,
            smd_limit: BALANCE_THRESHOLD,
        }
    }
}

impl MatchConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.target_frac > 0.0 && self.target_frac < 1.0) {
            return Err(Error::InvalidParameter(format!("target_frac {} outside (0, 1)", self.target_frac)));
        }
        if !(self.caliper_mult >= 0.0 && self.caliper_mult.is_finite()) {
            return Err(Error::InvalidParameter(format!("caliper_mult {}", self.caliper_mult)));
        }
        if !(self.smd_limit > 0.0) {
            return Err(Error::InvalidParameter(format!("smd_limit {}", self.smd_limit)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchResult {
    /// (train row, test row) pairs in matching order.
    pub pairs: Vec<(usize, usize)>,
    /// Caliper on the logit scale.
    pub caliper: f64,
    /// Validation rows vs all test rows; the propensity row comes first.
    pub balance: Vec<BalanceRow>,
    pub val_indices: Vec<usize>,
    pub remaining_train_indices: Vec<usize>,
    pub fallback_used: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fallback_reason: Option<String>,
}

impl MatchResult {
    pub fn propensity_balance(&self) -> &BalanceRow {
        &self.balance[0]
    }
}

fn logit(p: f64) -> f64 {
    let p = p.clamp(LOGIT_CLIP, 1.0 - LOGIT_CLIP);
    (p / (1.0 - p)).ln()
}

/// Greedy caliper matching without replacement. Test rows go in descending
/// propensity order and each takes the nearest unmatched train row on the
/// logit scale; equal distances go to the lower train score.
fn greedy_match(train_l: &[f64], test_l: &[f64], test_p: &[f64], caliper: f64) -> Vec<(usize, usize)> {
    let mut order: Vec<usize> = (0..train_l.len()).collect();
    order.sort_by(|&a, &b| train_l[a].total_cmp(&train_l[b]).then(a.cmp(&b)));
    let sorted: Vec<f64> = order.iter().map(|&i| train_l[i]).collect();
    let mut free: BTreeSet<usize> = (0..order.len()).collect();

    let mut tests: Vec<usize> = (0..test_l.len()).collect();
    tests.sort_by(|&a, &b| test_p[b].total_cmp(&test_p[a]).then(a.cmp(&b)));

    let mut pairs = Vec::new();
    for t in tests {
        if free.is_empty() {
            break;
        }
        let q = test_l[t];
        let at = sorted.partition_point(|&v| v < q);
        let below = free.range(..at).next_back().copied();
        let above = free.range(at..).next().copied();
        let pick = match (below, above) {
            (Some(b), Some(a)) => {
                if q - sorted[b] <= sorted[a] - q {
                    b
                } else {
                    a
                }
            }
            (Some(b), None) => b,
            (None, Some(a)) => a,
            (None, None) => unreachable!(),
        };
        if (sorted[pick] - q).abs() <= caliper {
            free.remove(&pick);
            pairs.push((order[pick], t));
        }
    }
    pairs
}

fn observed(x: &EncodedMatrix, j: usize, rows: impl Iterator<Item = usize>) -> Vec<f64> {
    rows.filter(|&r| !x.is_missing(r, j)).map(|r| x.value(r, j)).collect()
}

fn balance_table(
    train: &EncodedMatrix,
    test: &EncodedMatrix,
    ps: &PropensityScores,
    val: &[usize],
    limit: f64,
) -> Result<Vec<BalanceRow>> {
    let val_p: Vec<f64> = val.iter().map(|&i| ps.train_scores[i]).collect();
    let mut rows = vec![BalanceRow::with_limit(PROPENSITY_ROW, smd(&val_p, &ps.test_scores)?, limit)];
    for (j, name) in train.feature_names().iter().enumerate() {
        let a = observed(train, j, val.iter().copied());
        let b = observed(test, j, 0..test.n_rows());
        // a column without observed cells on one side has nothing to compare
        let s = if a.is_empty() || b.is_empty() { 0.0 } else { smd(&a, &b)? };
        rows.push(BalanceRow::with_limit(name.clone(), s, limit));
    }
    Ok(rows)
}

/// Every `m / k`-th matched train row in propensity order from a random
/// start, which keeps the subsample's score distribution close to the
/// matched set's.
fn systematic_subsample(pairs: &[(usize, usize)], scores: &[f64], k: usize, start: f64) -> Vec<usize> {
    let mut rows: Vec<usize> = pairs.iter().map(|p| p.0).collect();
    if rows.len() <= k {
        return rows;
    }
    rows.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]).then(a.cmp(&b)));
    let step = rows.len() as f64 / k as f64;
    (0..k)
        .map(|i| rows[(((i as f64 + start) * step) as usize).min(rows.len() - 1)])
        .collect()
}

fn top_by_propensity(scores: &[f64], k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    idx.truncate(k);
    idx
}

/// Picks a validation split of the training rows that resembles the test
/// data, by propensity score matching.
///
/// Matched train rows become the validation set when there are at least
/// `target_frac * n_train` of them and, after seeded subsampling to that
/// size, their propensity SMD against the test rows is below `smd_limit`.
/// Otherwise the highest-propensity train rows are used instead and
/// `fallback_used` is set. Balance is always reported for the chosen set.
pub fn psm_validation_select(
    train: &EncodedMatrix,
    test: &EncodedMatrix,
    ps: &PropensityScores,
    cfg: &MatchConfig,
    seed: u64,
) -> Result<MatchResult> {
    cfg.validate()?;
    let n_train = train.n_rows();
    if ps.n_train() != n_train || ps.n_test() != test.n_rows() {
        return Err(Error::LengthMismatch(format!(
            "propensity scores cover {}/{} rows, data has {}/{}",
            ps.n_train(),
            ps.n_test(),
            n_train,
            test.n_rows()
        )));
    }
    if train.feature_names() != test.feature_names() {
        return Err(Error::FeatureMismatch("train and test features differ".into()));
    }
    if n_train < 2 {
        return Err(Error::EmptyData("need at least 2 train rows to split"));
    }
    let n_val = ((cfg.target_frac * n_train as f64).round() as usize).clamp(1, n_train - 1);

    let train_l: Vec<f64> = ps.train_scores.iter().map(|&p| logit(p)).collect();
    let test_l: Vec<f64> = ps.test_scores.iter().map(|&p| logit(p)).collect();
    let all_l: Vec<f64> = train_l.iter().chain(&test_l).copied().collect();
    let sd = sample_variance(&all_l).sqrt();
    let caliper = cfg.caliper_mult * sd;
    let mut r = rng::rng(rng::derive(seed, rng::TAG_SUBSAMPLE));

    let finish = |pairs, val: Vec<usize>, fallback_reason: Option<String>| -> Result<MatchResult> {
        let mut val = val;
        val.sort_unstable();
        let mut in_val = vec![false; n_train];
        val.iter().for_each(|&i| in_val[i] = true);
        let remaining = (0..n_train).filter(|&i| !in_val[i]).collect();
        Ok(MatchResult {
            pairs,
            caliper,
            balance: balance_table(train, test, ps, &val, cfg.smd_limit)?,
            val_indices: val,
            remaining_train_indices: remaining,
            fallback_used: fallback_reason.is_some(),
            fallback_reason,
        })
    };

    if sd == 0.0 {
        log::warn!("all propensity scores are equal; choosing validation rows at random");
        let val = index::sample(&mut r, n_train, n_val).into_vec();
        return finish(Vec::new(), val, Some("degenerate propensities: seeded random selection".into()));
    }

    let pairs = greedy_match(&train_l, &test_l, &ps.test_scores, caliper);
    if pairs.len() < n_val {
        let reason = format!("{} matches, {} needed", pairs.len(), n_val);
        log::info!("matching fallback: {reason}");
        return finish(pairs, top_by_propensity(&ps.train_scores, n_val), Some(reason));
    }
    let val = systematic_subsample(&pairs, &ps.train_scores, n_val, r.random());
    let val_p: Vec<f64> = val.iter().map(|&i| ps.train_scores[i]).collect();
    let prop_smd = smd(&val_p, &ps.test_scores)?;
    if !(prop_smd.abs() < cfg.smd_limit) {
        let reason = format!("propensity SMD {prop_smd:.4} not below {}", cfg.smd_limit);
        log::info!("matching fallback: {reason} (mean val p {:.4})", mean(&val_p));
        return finish(pairs, top_by_propensity(&ps.train_scores, n_val), Some(reason));
    }
    finish(pairs, val, None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adversarial::{encode_pair, propensity_oof, Learner};
    use crate::data::EncodingPolicy;
    use crate::synthgen::{generate, DriftSpec};

    fn scores(train: Vec<f64>, test: Vec<f64>) -> PropensityScores {
        PropensityScores {
            train_scores: train,
            test_scores: test,
            cv_auc: 0.5,
            fold_aucs: Vec::new(),
            folds: 5,
        }
    }

    fn check(m: &MatchResult, n_train: usize) {
        let mut seen = vec![false; n_train];
        for &(t, _) in &m.pairs {
            assert!(!seen[t], "train row {t} matched twice");
            seen[t] = true;
        }
        let mut all: Vec<usize> = m.val_indices.iter().chain(&m.remaining_train_indices).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..n_train).collect::<Vec<_>>());
        assert_eq!(m.balance[0].feature, PROPENSITY_ROW);
        if !m.fallback_used {
            assert!(m.propensity_balance().smd.abs() < 0.1);
        }
    }

    #[test]
    fn nearest_neighbour_example() {
        let l = |v: &[f64]| v.iter().map(|&p| logit(p)).collect::<Vec<_>>();
        let pairs = greedy_match(&l(&[0.1, 0.5, 0.9]), &l(&[0.48]), &[0.48], 1.0);
        assert_eq!(pairs, vec![(1, 0)]);
        // the more extreme test row claims the contested train row first
        let pairs = greedy_match(&l(&[0.5, 0.1]), &l(&[0.45, 0.55]), &[0.45, 0.55], 10.0);
        assert_eq!(pairs, vec![(0, 1), (1, 0)]);
        // nothing within the caliper
        assert!(greedy_match(&l(&[0.1]), &l(&[0.9]), &[0.9], 0.5).is_empty());
    }

    #[test]
    fn identical_rows_are_balanced() {
        let data = generate(&DriftSpec::gaussian(1000, 1000, 3, 2)).unwrap();
        let (tr, _) = encode_pair(&data.train, &data.test, EncodingPolicy::IMPUTE_ZERO).unwrap();
        let ps = propensity_oof(&tr, &tr, &Learner::default(), 5, 1).unwrap();
        let m = psm_validation_select(&tr, &tr, &ps, &MatchConfig::default(), 3).unwrap();
        check(&m, 1000);
        // nothing separates the sides, so every score is the prior
        assert!(m.fallback_used && m.pairs.is_empty());
        assert_eq!(m.val_indices.len(), 200);
        assert!(m.balance.iter().all(|b| b.smd.abs() < 0.25), "{:?}", m.balance);
    }

    #[test]
    fn identical_distributions_match() {
        let data = generate(&DriftSpec::gaussian(1000, 1000, 3, 2)).unwrap();
        let (tr, te) = encode_pair(&data.train, &data.test, EncodingPolicy::IMPUTE_ZERO).unwrap();
        let ps = propensity_oof(&tr, &te, &Learner::default(), 5, 1).unwrap();
        let m = psm_validation_select(&tr, &te, &ps, &MatchConfig::default(), 3).unwrap();
        check(&m, 1000);
        assert!(!m.fallback_used, "{:?}", m.fallback_reason);
        assert_eq!(m.val_indices.len(), 200);
        assert!(m.balance.iter().all(|b| b.smd.abs() < 0.25), "{:?}", m.balance);
    }

    #[test]
    fn disjoint_supports_fall_back() {
        let data = generate(&DriftSpec::gaussian(500, 500, 2, 4).with_mean_shift("f0", 8.0)).unwrap();
        let (tr, te) = encode_pair(&data.train, &data.test, EncodingPolicy::IMPUTE_ZERO).unwrap();
        let ps = propensity_oof(&tr, &te, &Learner::default(), 5, 2).unwrap();
        let m = psm_validation_select(&tr, &te, &ps, &MatchConfig::default(), 5).unwrap();
        check(&m, 500);
        assert!(m.fallback_used);
        let top = top_by_propensity(&ps.train_scores, 100);
        let mut top_sorted = top.clone();
        top_sorted.sort_unstable();
        assert_eq!(m.val_indices, top_sorted);
    }

    #[test]
    fn constant_propensities_pick_random_rows() {
        let data = generate(&DriftSpec::gaussian(50, 30, 2, 1)).unwrap();
        let (tr, te) = encode_pair(&data.train, &data.test, EncodingPolicy::IMPUTE_ZERO).unwrap();
        let ps = scores(vec![0.4; 50], vec![0.4; 30]);
        let a = psm_validation_select(&tr, &te, &ps, &MatchConfig::default(), 8).unwrap();
        check(&a, 50);
        assert!(a.fallback_used && a.pairs.is_empty());
        assert_eq!(a.val_indices.len(), 10);
        assert_eq!(a, psm_validation_select(&tr, &te, &ps, &MatchConfig::default(), 8).unwrap());
    }

    #[test]
    fn coverage_is_checked() {
        let data = generate(&DriftSpec::gaussian(10, 10, 2, 1)).unwrap();
        let (tr, te) = encode_pair(&data.train, &data.test, EncodingPolicy::IMPUTE_ZERO).unwrap();
        let ps = scores(vec![0.5; 9], vec![0.5; 10]);
        assert!(psm_validation_select(&tr, &te, &ps, &MatchConfig::default(), 0).is_err());
    }
}
