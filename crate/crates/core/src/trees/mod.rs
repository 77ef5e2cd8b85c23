//! Tree learners: CART decision trees, random forests, and histogram
//! gradient-boosted trees, sharing one fitted-model type.
//!
//! Splits send a row left when its value is `<= threshold`. Masked (missing)
//! cells follow the node's default direction. Decision-tree and forest
//! leaves hold class-1 probabilities; boosted leaves hold shrunken log-odds
//! contributions added to `base_score`.

mod binning;
mod cart;
mod forest;
mod gbdt;

use serde::{Deserialize, Serialize};

use crate::data::EncodedMatrix;
use crate::error::{Error, Result};

pub use cart::{fit_decision_tree, DTParams};
pub use forest::{fit_random_forest, RFParams};
pub use gbdt::{fit_gbdt, GBDTParams, GrowthCap, Holdout};
pub(crate) use gbdt::stratified_holdout;

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LearnerKind {
    Dt,
    Rf,
    Gbdt,
}

impl std::str::FromStr for LearnerKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "dt" => Ok(LearnerKind::Dt),
            "rf" => Ok(LearnerKind::Rf),
            "gbdt" => Ok(LearnerKind::Gbdt),
            other => Err(Error::InvalidParameter(format!("unknown learner `{other}`"))),
        }
    }
}

impl std::fmt::Display for LearnerKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            LearnerKind::Dt => "dt",
            LearnerKind::Rf => "rf",
            LearnerKind::Gbdt => "gbdt",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Node {
    Split {
        feature: usize,
        threshold: f64,
        default_left: bool,
        left: usize,
        right: usize,
        /// Objective improvement credited to `feature`.
        gain: f64,
        samples: usize,
    },
    Leaf {
        value: f64,
        samples: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    /// Root is `nodes[0]`.
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn leaf(value: f64, samples: usize) -> Self {
        Tree {
            nodes: vec![Node::Leaf { value, samples }],
        }
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf { .. })).count()
    }

    pub fn depth(&self) -> usize {
        fn go(nodes: &[Node], i: usize) -> usize {
            match &nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + go(nodes, *left).max(go(nodes, *right)),
            }
        }
        go(&self.nodes, 0)
    }

    /// Index of the leaf reached by `row`.
    pub fn leaf_index(&self, x: &EncodedMatrix, row: usize) -> usize {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Leaf { .. } => return i,
                Node::Split {
                    feature,
                    threshold,
                    default_left,
                    left,
                    right,
                    ..
                } => {
                    let go_left = if x.is_missing(row, *feature) {
                        *default_left
                    } else {
                        x.value(row, *feature) <= *threshold
                    };
                    i = if go_left { *left } else { *right };
                }
            }
        }
    }

    pub fn predict_row(&self, x: &EncodedMatrix, row: usize) -> f64 {
        match &self.nodes[self.leaf_index(x, row)] {
            Node::Leaf { value, .. } => *value,
            Node::Split { .. } => unreachable!(),
        }
    }

    fn add_gains(&self, into: &mut [f64]) {
        for n in &self.nodes {
            if let Node::Split { feature, gain, .. } = n {
                into[*feature] += *gain;
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "learner", rename_all = "snake_case")]
pub enum ModelParams {
    Dt(DTParams),
    Rf(RFParams),
    Gbdt(GBDTParams),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeEnsembleModel {
    pub format_version: u32,
    pub kind: LearnerKind,
    pub params: ModelParams,
    pub feature_names: Vec<String>,
    pub trees: Vec<Tree>,
    /// Prior log-odds for boosted models, 0 otherwise.
    pub base_score: f64,
    /// Accumulated split gain per feature over the trees used for prediction.
    pub gain_importance: Vec<f64>,
    /// Number of boosted trees used at prediction time.
    pub best_iteration: Option<usize>,
    /// Holdout log-loss after 0, 1, 2, ... trees (boosted models only).
    pub holdout_loss: Vec<f64>,
    /// False when the holdout could not drive early stopping.
    pub early_stopping: bool,
}

impl TreeEnsembleModel {
    pub(crate) fn new(
        kind: LearnerKind,
        params: ModelParams,
        feature_names: Vec<String>,
        trees: Vec<Tree>,
    ) -> Self {
        let mut m = TreeEnsembleModel {
            format_version: MODEL_FORMAT_VERSION,
            kind,
            params,
            gain_importance: vec![0.0; feature_names.len()],
            feature_names,
            trees,
            base_score: 0.0,
            best_iteration: None,
            holdout_loss: Vec::new(),
            early_stopping: false,
        };
        m.recompute_importance();
        m
    }

    fn used_trees(&self) -> &[Tree] {
        match self.best_iteration {
            Some(k) if self.kind == LearnerKind::Gbdt => &self.trees[..k.min(self.trees.len())],
            _ => &self.trees,
        }
    }

    pub(crate) fn recompute_importance(&mut self) {
        let mut imp = vec![0.0; self.feature_names.len()];
        for t in self.used_trees() {
            t.add_gains(&mut imp);
        }
        self.gain_importance = imp;
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let m: TreeEnsembleModel = serde_json::from_str(s)?;
        if m.format_version != MODEL_FORMAT_VERSION {
            return Err(Error::Serde(format!(
                "unsupported model format version {}",
                m.format_version
            )));
        }
        Ok(m)
    }

    /// Raw boosted score (log-odds) per row.
    pub fn decision_function(&self, x: &EncodedMatrix) -> Result<Vec<f64>> {
        self.check_features(x)?;
        let trees = self.used_trees();
        Ok((0..x.n_rows())
            .map(|r| self.base_score + trees.iter().map(|t| t.predict_row(x, r)).sum::<f64>())
            .collect())
    }

    /// Class-1 probability per row.
    pub fn predict_proba(&self, x: &EncodedMatrix) -> Result<Vec<f64>> {
        match self.kind {
            LearnerKind::Gbdt => Ok(self.decision_function(x)?.into_iter().map(sigmoid).collect()),
            LearnerKind::Dt | LearnerKind::Rf => {
                self.check_features(x)?;
                let k = self.trees.len() as f64;
                Ok((0..x.n_rows())
                    .map(|r| self.trees.iter().map(|t| t.predict_row(x, r)).sum::<f64>() / k)
                    .collect())
            }
        }
    }

    /// Gain shares normalized to sum to 1; all zeros when nothing was split.
    pub fn gain_importance(&self) -> Vec<f64> {
        let total: f64 = self.gain_importance.iter().sum();
        if total <= 0.0 {
            return vec![0.0; self.gain_importance.len()];
        }
        self.gain_importance.iter().map(|g| g / total).collect()
    }

    /// Features with their gain shares, largest first (ties by feature order).
    pub fn ranked_importance(&self) -> Vec<(String, f64)> {
        let shares = self.gain_importance();
        let mut ranked: Vec<(usize, f64)> = shares.into_iter().enumerate().collect();
        ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        ranked
            .into_iter()
            .map(|(j, s)| (self.feature_names[j].clone(), s))
            .collect()
    }

    fn check_features(&self, x: &EncodedMatrix) -> Result<()> {
        if x.feature_names() != self.feature_names.as_slice() {
            return Err(Error::FeatureMismatch(format!(
                "model trained on [{}], got [{}]",
                self.feature_names.join(", "),
                x.feature_names().join(", ")
            )));
        }
        Ok(())
    }
}

pub fn predict_proba(model: &TreeEnsembleModel, x: &EncodedMatrix) -> Result<Vec<f64>> {
    model.predict_proba(x)
}

pub fn gain_importance(model: &TreeEnsembleModel) -> Vec<f64> {
    model.gain_importance()
}

pub fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Checks shapes and returns weights scaled so the largest is 1.
pub(crate) fn prepare_weights(n: usize, w: Option<&[f64]>) -> Result<Vec<f64>> {
    let Some(w) = w else {
        return Ok(vec![1.0; n]);
    };
    if w.len() != n {
        return Err(Error::LengthMismatch(format!("{} weights for {n} rows", w.len())));
    }
    if w.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(Error::InvalidWeights("weights must be finite and >= 0"));
    }
    let max = w.iter().copied().fold(0.0, f64::max);
    if max <= 0.0 {
        return Err(Error::InvalidWeights("weights are all zero"));
    }
    Ok(w.iter().map(|v| v / max).collect())
}

pub(crate) fn check_xy(x: &EncodedMatrix, y: &[u8]) -> Result<()> {
    if x.n_rows() == 0 {
        return Err(Error::EmptyData("no rows to fit"));
    }
    if x.n_features() == 0 {
        return Err(Error::EmptyData("no features to fit"));
    }
    if y.len() != x.n_rows() {
        return Err(Error::LengthMismatch(format!(
            "{} labels for {} rows",
            y.len(),
            x.n_rows()
        )));
    }
    if y.iter().any(|&v| v > 1) {
        return Err(Error::InvalidParameter("labels must be 0 or 1".into()));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dummy(kind: LearnerKind, trees: Vec<Tree>) -> TreeEnsembleModel {
        let params = match kind {
            LearnerKind::Dt => ModelParams::Dt(DTParams::default()),
            LearnerKind::Rf => ModelParams::Rf(RFParams::default()),
            LearnerKind::Gbdt => ModelParams::Gbdt(GBDTParams::default()),
        };
        TreeEnsembleModel::new(kind, params, vec!["a".into()], trees)
    }

    fn x() -> EncodedMatrix {
        EncodedMatrix::from_columns(vec!["a".into()], vec![vec![0.0, 1.0, 2.0]]).unwrap()
    }

    #[test]
    fn single_leaf_scores_constant() {
        let m = dummy(LearnerKind::Dt, vec![Tree::leaf(0.3, 3)]);
        assert_eq!(m.predict_proba(&x()).unwrap(), vec![0.3; 3]);
        assert_eq!(m.gain_importance(), vec![0.0]);
    }

    #[test]
    fn forest_averages_trees() {
        let m = dummy(LearnerKind::Rf, vec![Tree::leaf(0.2, 3), Tree::leaf(0.6, 3)]);
        for p in m.predict_proba(&x()).unwrap() {
            assert!((p - 0.4).abs() < 1e-15);
        }
    }

    #[test]
    fn empty_boosted_model_is_prior() {
        let mut m = dummy(LearnerKind::Gbdt, vec![]);
        m.base_score = (0.25f64 / 0.75).ln();
        m.best_iteration = Some(0);
        for p in m.predict_proba(&x()).unwrap() {
            assert!((p - 0.25).abs() < 1e-12);
        }
    }

    #[test]
    fn single_split_owns_all_importance() {
        let tree = Tree {
            nodes: vec![
                Node::Split {
                    feature: 1,
                    threshold: 0.5,
                    default_left: true,
                    left: 1,
                    right: 2,
                    gain: 0.7,
                    samples: 3,
                },
                Node::Leaf { value: 0.0, samples: 1 },
                Node::Leaf { value: 1.0, samples: 2 },
            ],
        };
        let m = TreeEnsembleModel::new(
            LearnerKind::Dt,
            ModelParams::Dt(DTParams::default()),
            vec!["a".into(), "b".into()],
            vec![tree],
        );
        assert_eq!(m.gain_importance(), vec![0.0, 1.0]);
        let x = EncodedMatrix::from_rows(
            vec!["a".into(), "b".into()],
            &[vec![9.0, 0.0], vec![9.0, 1.0], vec![9.0, f64::NAN]],
        )
        .unwrap();
        assert_eq!(m.predict_proba(&x).unwrap(), vec![0.0, 1.0, 0.0]);
    }

    #[test]
    fn feature_mismatch_is_an_error() {
        let m = dummy(LearnerKind::Dt, vec![Tree::leaf(0.3, 3)]);
        let other = EncodedMatrix::from_columns(vec!["z".into()], vec![vec![1.0]]).unwrap();
        assert!(matches!(m.predict_proba(&other), Err(Error::FeatureMismatch(_))));
    }

    #[test]
    fn weights_are_scaled_to_unit_max() {
        assert_eq!(prepare_weights(2, Some(&[2.0, 4.0])).unwrap(), vec![0.5, 1.0]);
        assert_eq!(prepare_weights(3, Some(&[0.3; 3])).unwrap(), vec![1.0; 3]);
        assert!(prepare_weights(2, Some(&[0.0, 0.0])).is_err());
        assert!(prepare_weights(2, Some(&[-1.0, 1.0])).is_err());
        assert!(prepare_weights(2, Some(&[1.0])).is_err());
    }
}
