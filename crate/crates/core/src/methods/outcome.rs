use serde::{Deserialize, Serialize};

use super::{MatchResult, SelectionTrace, WeightVector};
use crate::data::EncodedMatrix;
use crate::error::{Error, Result};
use crate::trees::{fit_gbdt, GBDTParams, Holdout, TreeEnsembleModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Adaptation {
    Baseline,
    FeatureSelection,
    ValidationSelection,
    Ipw,
}

impl Adaptation {
    pub const ALL: [Adaptation; 4] = [
        Adaptation::Baseline,
        Adaptation::FeatureSelection,
        Adaptation::ValidationSelection,
        Adaptation::Ipw,
    ];
}

impl std::fmt::Display for Adaptation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Adaptation::Baseline => "baseline",
            Adaptation::FeatureSelection => "feature_selection",
            Adaptation::ValidationSelection => "validation_selection",
            Adaptation::Ipw => "ipw",
        })
    }
}

impl std::str::FromStr for Adaptation {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Adaptation::ALL
            .into_iter()
            .find(|a| a.to_string() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown adaptation `{s}`")))
    }
}

/// What an adaptation hands to outcome training.
#[derive(Debug, Clone, PartialEq)]
pub enum AdaptationPlan {
    Baseline,
    FeatureSelection { features: Vec<String> },
    ValidationSelection {
        val_indices: Vec<usize>,
        remaining_train_indices: Vec<usize>,
    },
    Ipw { weights: Vec<f64> },
}

impl AdaptationPlan {
    pub fn adaptation(&self) -> Adaptation {
        match self {
            AdaptationPlan::Baseline => Adaptation::Baseline,
            AdaptationPlan::FeatureSelection { .. } => Adaptation::FeatureSelection,
            AdaptationPlan::ValidationSelection { .. } => Adaptation::ValidationSelection,
            AdaptationPlan::Ipw { .. } => Adaptation::Ipw,
        }
    }
}

impl From<&SelectionTrace> for AdaptationPlan {
    fn from(t: &SelectionTrace) -> Self {
        AdaptationPlan::FeatureSelection {
            features: t.final_features.clone(),
        }
    }
}

impl From<&MatchResult> for AdaptationPlan {
    fn from(m: &MatchResult) -> Self {
        AdaptationPlan::ValidationSelection {
            val_indices: m.val_indices.clone(),
            remaining_train_indices: m.remaining_train_indices.clone(),
        }
    }
}

impl From<&WeightVector> for AdaptationPlan {
    fn from(w: &WeightVector) -> Self {
        AdaptationPlan::Ipw {
            weights: w.weights.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum ValidationSource {
    /// Seeded internal holdout of the training rows.
    Internal,
    /// Rows chosen by propensity matching.
    Matched { rows: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutcomeModel {
    pub model: TreeEnsembleModel,
    pub adaptation: Adaptation,
    pub features: Vec<String>,
    pub weighted: bool,
    pub validation: ValidationSource,
}

impl OutcomeModel {
    /// Scores rows of a matrix that contains (at least) the model's features.
    pub fn predict_proba(&self, x: &EncodedMatrix) -> Result<Vec<f64>> {
        if x.feature_names() == self.features.as_slice() {
            self.model.predict_proba(x)
        } else {
            self.model.predict_proba(&x.select_features(&self.features)?)
        }
    }
}

fn check_indices(idx: &[usize], n: usize, what: &str) -> Result<()> {
    if idx.iter().any(|&i| i >= n) {
        return Err(Error::InvalidParameter(format!("{what} index out of range for {n} rows")));
    }
    Ok(())
}

/// Fits the boosted outcome model on `(train, y)` as the plan prescribes.
pub fn train_outcome(
    train: &EncodedMatrix,
    y: &[u8],
    plan: &AdaptationPlan,
    params: &GBDTParams,
    seed: u64,
) -> Result<OutcomeModel> {
    if y.len() != train.n_rows() {
        return Err(Error::LengthMismatch(format!(
            "{} labels for {} rows",
            y.len(),
            train.n_rows()
        )));
    }
    let p = GBDTParams { seed, ..*params };
    let all_features = || train.feature_names().to_vec();
    let (model, features, weighted, validation) = match plan {
        AdaptationPlan::Baseline => (fit_gbdt(train, y, None, &p, None)?, all_features(), false, ValidationSource::Internal),
        AdaptationPlan::FeatureSelection { features } => {
            if features.is_empty() {
                return Err(Error::EmptyData("feature selection kept no features"));
            }
            let x = train.select_features(features)?;
            (fit_gbdt(&x, y, None, &p, None)?, features.clone(), false, ValidationSource::Internal)
        }
        AdaptationPlan::ValidationSelection {
            val_indices,
            remaining_train_indices,
        } => {
            if remaining_train_indices.is_empty() {
                return Err(Error::EmptyData("no training rows left after validation selection"));
            }
            if val_indices.is_empty() {
                return Err(Error::EmptyData("empty validation selection"));
            }
            check_indices(val_indices, train.n_rows(), "validation")?;
            check_indices(remaining_train_indices, train.n_rows(), "training")?;
            let xt = train.select_rows(remaining_train_indices);
            let yt: Vec<u8> = remaining_train_indices.iter().map(|&i| y[i]).collect();
            let xv = train.select_rows(val_indices);
            let yv: Vec<u8> = val_indices.iter().map(|&i| y[i]).collect();
            let hold = Holdout {
                x: &xv,
                y: &yv,
                w: None,
            };
            let model = fit_gbdt(&xt, &yt, None, &p, Some(hold))?;
            let validation = ValidationSource::Matched {
                rows: val_indices.len(),
            };
            (model, all_features(), false, validation)
        }
        AdaptationPlan::Ipw { weights } => {
            let model = fit_gbdt(train, y, Some(weights), &p, None)?;
            (model, all_features(), true, ValidationSource::Internal)
        }
    };
    Ok(OutcomeModel {
        model,
        adaptation: plan.adaptation(),
        features,
        weighted,
        validation,
    })
}
