use serde::{Deserialize, Serialize};

use crate::adversarial::{detect_drift, Learner, DEFAULT_THETA_AUC};
use crate::data::EncodedMatrix;
use crate::error::{Error, Result};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FeatureSelectionConfig {
    pub theta_auc: f64,
    /// Fraction of the remaining features eligible for removal per round.
    pub x_pct: f64,
    /// Minimum normalized gain share for a feature to be removed.
    pub theta_imp: f64,
    /// `None` means the starting feature count.
    pub max_iter: Option<usize>,
    pub min_features: usize,
}

impl Default for FeatureSelectionConfig {
    fn default() -> Self {
        FeatureSelectionConfig {
            theta_auc: DEFAULT_THETA_AUC,
            x_pct: 0.1,
            theta_imp: 0.1,
            max_iter: None,
            min_features: 2,
        }
    }
}

impl FeatureSelectionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.theta_auc) {
            return Err(Error::InvalidParameter(format!("theta_auc {} outside [0, 1]", self.theta_auc)));
        }
        if !(self.x_pct > 0.0 && self.x_pct <= 1.0) {
            return Err(Error::InvalidParameter(format!("x_pct {} outside (0, 1]", self.x_pct)));
        }
        if !(self.theta_imp >= 0.0) {
            return Err(Error::InvalidParameter(format!("theta_imp {} < 0", self.theta_imp)));
        }
        if self.min_features < 1 {
            return Err(Error::InvalidParameter("min_features must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionIteration {
    /// Held-out adversarial AUC before this round's removal.
    pub auc: f64,
    /// Removed features with their gain shares.
    pub removed: Vec<(String, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionTrace {
    pub initial_features: Vec<String>,
    /// One entry per round that removed features.
    pub iterations: Vec<SelectionIteration>,
    pub final_features: Vec<String>,
    /// Adversarial AUC on `final_features`.
    pub final_auc: f64,
    /// The loop stopped with AUC still above `theta_auc`.
    pub unresolved: bool,
}

impl SelectionTrace {
    pub fn removed(&self) -> Vec<String> {
        self.iterations
            .iter()
            .flat_map(|it| it.removed.iter().map(|(f, _)| f.clone()))
            .collect()
    }
}

/// Repeatedly fits the adversarial classifier and drops the features that
/// drive it until its held-out AUC is at most `theta_auc`.
///
/// A round removes features ranked in the top `ceil(x_pct * remaining)` whose
/// gain share exceeds `theta_imp`, or the single top feature when none
/// qualify. Removals never take the count below `min_features`; reaching that
/// floor, or `max_iter` rounds, with AUC above the threshold marks the trace
/// unresolved.
pub fn auto_feature_selection(
    train: &EncodedMatrix,
    test: &EncodedMatrix,
    learner: &Learner,
    cfg: &FeatureSelectionConfig,
    seed: u64,
) -> Result<SelectionTrace> {
    cfg.validate()?;
    let initial: Vec<String> = train.feature_names().to_vec();
    if initial.len() < cfg.min_features {
        return Err(Error::InvalidParameter(format!(
            "{} features, fewer than min_features = {}",
            initial.len(),
            cfg.min_features
        )));
    }
    let max_iter = cfg.max_iter.unwrap_or(initial.len());
    let mut remaining = initial.clone();
    let mut iterations = Vec::new();
    loop {
        let verdict = detect_drift(
            &train.select_features(&remaining)?,
            &test.select_features(&remaining)?,
            learner,
            cfg.theta_auc,
            rng::derive(seed, iterations.len() as u64),
        )?;
        log::debug!(
            "round {}: auc {:.4} on {} features",
            iterations.len(),
            verdict.auc,
            remaining.len()
        );
        let done = !verdict.drifted;
        if done || iterations.len() >= max_iter || remaining.len() <= cfg.min_features {
            return Ok(SelectionTrace {
                initial_features: initial,
                iterations,
                final_features: remaining,
                final_auc: verdict.auc,
                unresolved: !done,
            });
        }
        let top_k = (cfg.x_pct * remaining.len() as f64).ceil() as usize;
        let mut removed: Vec<(String, f64)> = verdict
            .top_features
            .iter()
            .take(top_k)
            .filter(|(_, share)| *share > cfg.theta_imp)
            .cloned()
            .collect();
        if removed.is_empty() {
            removed.push(verdict.top_features[0].clone());
        }
        removed.truncate(remaining.len() - cfg.min_features);
        remaining.retain(|f| !removed.iter().any(|(r, _)| r == f));
        iterations.push(SelectionIteration {
            auc: verdict.auc,
            removed,
        });
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adversarial::encode_pair;
    use crate::data::EncodingPolicy;
    use crate::synthgen::{generate, DriftSpec};
    use std::collections::BTreeSet;

    fn pair(spec: &DriftSpec) -> (EncodedMatrix, EncodedMatrix) {
        let data = generate(spec).unwrap();
        encode_pair(&data.train, &data.test, EncodingPolicy::IMPUTE_ZERO).unwrap()
    }

    fn check_trace(t: &SelectionTrace) {
        let mut seen = BTreeSet::new();
        for it in &t.iterations {
            assert!(!it.removed.is_empty());
            for (f, _) in &it.removed {
                assert!(seen.insert(f.clone()), "{f} removed twice");
            }
        }
        let mut all: BTreeSet<String> = t.final_features.iter().cloned().collect();
        assert!(all.is_disjoint(&seen));
        all.extend(seen);
        assert_eq!(all, t.initial_features.iter().cloned().collect());
        assert!(t.iterations.len() <= t.initial_features.len());
    }

    #[test]
    fn single_shift_is_removed() {
        let (tr, te) = pair(&DriftSpec::gaussian(2000, 2000, 10, 1).with_mean_shift("f0", 3.0));
        let t = auto_feature_selection(&tr, &te, &Learner::default(), &Default::default(), 1).unwrap();
        check_trace(&t);
        assert_eq!(t.iterations.len(), 1);
        assert_eq!(t.removed(), vec!["f0".to_string()]);
        assert!(!t.unresolved);
        assert!((0.45..=0.55).contains(&t.final_auc), "{}", t.final_auc);
    }

    #[test]
    fn no_drift_removes_nothing() {
        let (tr, te) = pair(&DriftSpec::gaussian(1500, 1500, 5, 2));
        let t = auto_feature_selection(&tr, &te, &Learner::default(), &Default::default(), 2).unwrap();
        assert!(t.iterations.is_empty());
        assert_eq!(t.final_features, tr.feature_names());
    }

    #[test]
    fn everything_shifted_is_unresolved() {
        let mut spec = DriftSpec::gaussian(800, 800, 5, 3);
        for j in 0..5 {
            spec = spec.with_mean_shift(&format!("f{j}"), 2.0);
        }
        let (tr, te) = pair(&spec);
        let t = auto_feature_selection(&tr, &te, &Learner::default(), &Default::default(), 3).unwrap();
        check_trace(&t);
        assert!(t.unresolved);
        assert_eq!(t.final_features.len(), 2);
        assert!(t.final_auc > 0.6);
    }

    #[test]
    fn max_iter_caps_rounds() {
        let spec = DriftSpec::gaussian(600, 600, 4, 4)
            .with_mean_shift("f0", 2.0)
            .with_mean_shift("f3", 2.0);
        let (tr, te) = pair(&spec);
        let cfg = FeatureSelectionConfig {
            max_iter: Some(1),
            theta_imp: 0.9,
            ..Default::default()
        };
        let t = auto_feature_selection(&tr, &te, &Learner::default(), &cfg, 4).unwrap();
        assert_eq!(t.iterations.len(), 1);
        assert_eq!(t.iterations[0].removed.len(), 1);
        assert!(t.unresolved);
    }

    #[test]
    fn bad_config_rejected() {
        let (tr, te) = pair(&DriftSpec::gaussian(50, 50, 3, 0));
        for cfg in [
            FeatureSelectionConfig { x_pct: 0.0, ..Default::default() },
            FeatureSelectionConfig { theta_imp: -1.0, ..Default::default() },
            FeatureSelectionConfig { min_features: 0, ..Default::default() },
            FeatureSelectionConfig { min_features: 4, ..Default::default() },
        ] {
            assert!(auto_feature_selection(&tr, &te, &Learner::default(), &cfg, 0).is_err());
        }
    }
}
