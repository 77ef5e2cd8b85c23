//! The train-vs-test classification problem: stacking, out-of-fold
//! propensity scores, and drift verdicts.

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{align_codebooks, encode, Dataset, EncodedMatrix, EncodingPolicy};
use crate::error::{Error, Result};
use crate::metrics::auc;
use crate::rng;
use crate::trees::{
    fit_decision_tree, fit_gbdt, fit_random_forest, DTParams, GBDTParams, LearnerKind, RFParams,
    TreeEnsembleModel,
};

pub const DEFAULT_THETA_AUC: f64 = 0.6;
pub const DEFAULT_FOLDS: usize = 5;

/// Share of stacked rows held out when measuring the verdict AUC.
pub const VERDICT_HOLDOUT: f64 = 0.25;

/// A tree learner together with its parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "snake_case")]
pub enum Learner {
    Dt(DTParams),
    Rf(RFParams),
    Gbdt(GBDTParams),
}

impl Default for Learner {
    fn default() -> Self {
        Learner::Gbdt(GBDTParams::default())
    }
}

impl From<LearnerKind> for Learner {
    fn from(kind: LearnerKind) -> Self {
        match kind {
            LearnerKind::Dt => Learner::Dt(DTParams::default()),
            LearnerKind::Rf => Learner::Rf(RFParams::default()),
            LearnerKind::Gbdt => Learner::Gbdt(GBDTParams::default()),
        }
    }
}

impl Learner {
    pub fn kind(&self) -> LearnerKind {
        match self {
            Learner::Dt(_) => LearnerKind::Dt,
            Learner::Rf(_) => LearnerKind::Rf,
            Learner::Gbdt(_) => LearnerKind::Gbdt,
        }
    }

    /// Fits on `x`, overriding the stochastic learners' seed with `seed`.
    /// Decision trees and forests see missing cells imputed with zero.
    pub fn fit(
        &self,
        x: &EncodedMatrix,
        y: &[u8],
        w: Option<&[f64]>,
        seed: u64,
    ) -> Result<TreeEnsembleModel> {
        match *self {
            Learner::Dt(p) => fit_decision_tree(&x.impute_zero(), y, w, &p),
            Learner::Rf(p) => fit_random_forest(&x.impute_zero(), y, w, &RFParams { seed, ..p }),
            Learner::Gbdt(p) => fit_gbdt(x, y, w, &GBDTParams { seed, ..p }, None),
        }
    }

    fn predict(&self, model: &TreeEnsembleModel, x: &EncodedMatrix) -> Result<Vec<f64>> {
        match self {
            Learner::Gbdt(_) => model.predict_proba(x),
            _ => model.predict_proba(&x.impute_zero()),
        }
    }
}

/// Encodes a train/test pair so both share the train codebooks.
pub fn encode_pair(
    train: &Dataset,
    test: &Dataset,
    policy: EncodingPolicy,
) -> Result<(EncodedMatrix, EncodedMatrix)> {
    let x_train = encode(train, policy)?;
    let x_test = align_codebooks(&x_train, test, policy)?;
    Ok((x_train, x_test))
}

/// Row-stacks train (z = 0) over test (z = 1).
pub fn stack_adversarial(
    train: &EncodedMatrix,
    test: &EncodedMatrix,
) -> Result<(EncodedMatrix, Vec<u8>)> {
    if train.n_rows() == 0 {
        return Err(Error::EmptyData("train"));
    }
    if test.n_rows() == 0 {
        return Err(Error::EmptyData("test"));
    }
    if train.feature_names() != test.feature_names() {
        return Err(Error::FeatureMismatch(format!(
            "train has {:?}, test has {:?}",
            train.feature_names(),
            test.feature_names()
        )));
    }
    let x = train.vstack(test)?;
    let mut z = vec![0u8; train.n_rows()];
    z.resize(train.n_rows() + test.n_rows(), 1);
    Ok((x, z))
}

/// Fold index per row. Each class is shuffled and dealt round-robin, so every
/// fold holds both classes in roughly the overall ratio.
pub fn stratified_folds(z: &[u8], k: usize, seed: u64) -> Result<Vec<usize>> {
    if k < 2 {
        return Err(Error::Folds {
            folds: k,
            reason: "need at least 2 folds".into(),
        });
    }
    if k > z.len() {
        return Err(Error::Folds {
            folds: k,
            reason: format!("only {} rows", z.len()),
        });
    }
    let mut fold = vec![0usize; z.len()];
    let mut r = rng::rng(seed);
    for class in [0u8, 1] {
        let mut idx: Vec<usize> = (0..z.len()).filter(|&i| z[i] == class).collect();
        if idx.len() < k {
            return Err(Error::Folds {
                folds: k,
                reason: format!("class {class} has only {} rows", idx.len()),
            });
        }
        idx.shuffle(&mut r);
        for (pos, &i) in idx.iter().enumerate() {
            fold[i] = pos % k;
        }
    }
    Ok(fold)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropensityScores {
    /// Out-of-fold `P(test | x)` per train row.
    pub train_scores: Vec<f64>,
    /// Out-of-fold `P(test | x)` per test row.
    pub test_scores: Vec<f64>,
    /// AUC of all out-of-fold scores against the train/test indicator.
    pub cv_auc: f64,
    pub fold_aucs: Vec<f64>,
    pub folds: usize,
}

impl PropensityScores {
    /// Train scores followed by test scores, in stacking order.
    pub fn stacked(&self) -> Vec<f64> {
        let mut v = self.train_scores.clone();
        v.extend_from_slice(&self.test_scores);
        v
    }

    pub fn n_train(&self) -> usize {
        self.train_scores.len()
    }

    pub fn n_test(&self) -> usize {
        self.test_scores.len()
    }
}

/// Out-of-fold propensity scores from `k`-fold stratified cross-validation.
/// Folds are fitted in parallel.
pub fn propensity_oof(
    train: &EncodedMatrix,
    test: &EncodedMatrix,
    learner: &Learner,
    k: usize,
    seed: u64,
) -> Result<PropensityScores> {
    let (x, z) = stack_adversarial(train, test)?;
    let fold = stratified_folds(&z, k, rng::derive(seed, rng::TAG_FOLDS))?;
    let fit_seed = rng::derive(seed, rng::TAG_FIT);
    let per_fold: Vec<(Vec<usize>, Vec<f64>)> = (0..k)
        .into_par_iter()
        .map(|f| {
            let (held, kept): (Vec<usize>, Vec<usize>) = (0..z.len()).partition(|&i| fold[i] == f);
            let zk: Vec<u8> = kept.iter().map(|&i| z[i]).collect();
            let model = learner.fit(&x.select_rows(&kept), &zk, None, rng::derive(fit_seed, f as u64))?;
            let scores = learner.predict(&model, &x.select_rows(&held))?;
            Ok((held, scores))
        })
        .collect::<Result<_>>()?;

    let mut oof = vec![0.0; z.len()];
    let mut fold_aucs = Vec::with_capacity(k);
    for (held, scores) in &per_fold {
        for (&i, &s) in held.iter().zip(scores) {
            oof[i] = s;
        }
        let zh: Vec<u8> = held.iter().map(|&i| z[i]).collect();
        fold_aucs.push(auc(scores, &zh)?);
    }
    let cv_auc = auc(&oof, &z)?;
    let test_scores = oof.split_off(train.n_rows());
    Ok(PropensityScores {
        train_scores: oof,
        test_scores,
        cv_auc,
        fold_aucs,
        folds: k,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftVerdict {
    /// Held-out adversarial AUC.
    pub auc: f64,
    pub theta_auc: f64,
    pub drifted: bool,
    /// (feature, gain share) from a fit on all stacked rows, best first.
    pub top_features: Vec<(String, f64)>,
}

/// Fits the adversarial classifier on a seeded, stratified 75% of the stacked
/// rows and scores the remaining 25% for the verdict AUC. Importances come
/// from a second fit on every row.
pub fn detect_drift(
    train: &EncodedMatrix,
    test: &EncodedMatrix,
    learner: &Learner,
    theta_auc: f64,
    seed: u64,
) -> Result<DriftVerdict> {
    if !(0.0..=1.0).contains(&theta_auc) {
        return Err(Error::InvalidParameter(format!("theta_auc {theta_auc} outside [0, 1]")));
    }
    let (x, z) = stack_adversarial(train, test)?;
    let (fit_rows, hold_rows) = crate::trees::stratified_holdout(
        &z,
        VERDICT_HOLDOUT,
        rng::derive(seed, rng::TAG_VERDICT_SPLIT),
    );
    let hold_z: Vec<u8> = hold_rows.iter().map(|&i| z[i]).collect();
    if !(hold_z.contains(&0) && hold_z.contains(&1)) {
        return Err(Error::InvalidParameter(
            "too few rows for a held-out verdict split with both sides".into(),
        ));
    }
    let fit_seed = rng::derive(seed, rng::TAG_FIT);
    let fit_z: Vec<u8> = fit_rows.iter().map(|&i| z[i]).collect();
    let (split_model, full_model) = rayon::join(
        || learner.fit(&x.select_rows(&fit_rows), &fit_z, None, fit_seed),
        || learner.fit(&x, &z, None, rng::derive(fit_seed, 1)),
    );
    let scores = learner.predict(&split_model?, &x.select_rows(&hold_rows))?;
    let auc = auc(&scores, &hold_z)?;
    Ok(DriftVerdict {
        auc,
        theta_auc,
        drifted: auc > theta_auc,
        top_features: full_model?.ranked_importance(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthgen::{generate, DriftSpec};

    fn pair(spec: &DriftSpec) -> (EncodedMatrix, EncodedMatrix) {
        let data = generate(spec).unwrap();
        encode_pair(&data.train, &data.test, EncodingPolicy::IMPUTE_ZERO).unwrap()
    }

    #[test]
    fn stacking_contract() {
        let (tr, te) = pair(&DriftSpec::gaussian(3, 2, 2, 0));
        let (x, z) = stack_adversarial(&tr, &te).unwrap();
        assert_eq!(x.n_rows(), 5);
        assert_eq!(z.iter().map(|&v| v as usize).sum::<usize>(), 2);
        assert!(!x.feature_names().iter().any(|f| f == "label"));
        assert_eq!(stack_adversarial(&tr, &te).unwrap(), (x, z));
        let other = te.select_features(&["f0"]).unwrap();
        assert!(matches!(stack_adversarial(&tr, &other), Err(Error::FeatureMismatch(_))));
        let empty = te.select_rows(&[]);
        assert!(stack_adversarial(&tr, &empty).is_err());
    }

    #[test]
    fn folds_are_stratified() {
        let z: Vec<u8> = (0..103).map(|i| u8::from(i % 3 == 0)).collect();
        let fold = stratified_folds(&z, 5, 1).unwrap();
        for f in 0..5 {
            let ones = (0..z.len()).filter(|&i| fold[i] == f && z[i] == 1).count();
            let zeros = (0..z.len()).filter(|&i| fold[i] == f && z[i] == 0).count();
            assert!((6..=7).contains(&ones) && (13..=14).contains(&zeros), "{f}: {ones} {zeros}");
        }
        assert!(stratified_folds(&z, 1, 0).is_err());
        assert!(stratified_folds(&z[..4], 5, 0).is_err());
        assert!(stratified_folds(&[0, 0, 0, 1], 2, 0).is_err());
    }

    #[test]
    fn more_folds_than_rows_errors() {
        let (tr, te) = pair(&DriftSpec::gaussian(3, 2, 2, 0));
        let err = propensity_oof(&tr, &te, &Learner::default(), 6, 0).unwrap_err();
        assert!(matches!(err, Error::Folds { folds: 6, .. }));
    }

    #[test]
    fn no_drift_is_calibrated() {
        let mut aucs = Vec::new();
        for seed in 0..4 {
            let (tr, te) = pair(&DriftSpec::gaussian(1000, 500, 4, seed));
            let ps = propensity_oof(&tr, &te, &Learner::default(), 5, seed).unwrap();
            assert!(ps.train_scores.iter().chain(&ps.test_scores).all(|p| (0.0..=1.0).contains(p)));
            let mean: f64 = ps.stacked().iter().sum::<f64>() / 1500.0;
            assert!((mean - 1.0 / 3.0).abs() < 0.03, "{mean}");
            aucs.push(ps.cv_auc);
        }
        assert!(aucs.iter().all(|a| (0.45..=0.55).contains(a)), "{aucs:?}");
    }

    #[test]
    fn large_shift_is_detected() {
        let (tr, te) = pair(&DriftSpec::gaussian(600, 600, 3, 5).with_mean_shift("f0", 5.0));
        for learner in [LearnerKind::Dt, LearnerKind::Rf, LearnerKind::Gbdt] {
            let ps = propensity_oof(&tr, &te, &learner.into(), 5, 2).unwrap();
            assert!(ps.cv_auc >= 0.95, "{learner}: {}", ps.cv_auc);
        }
        let v = detect_drift(&tr, &te, &Learner::default(), 0.6, 2).unwrap();
        assert!(v.drifted && v.auc >= 0.95);
        assert_eq!(v.top_features[0].0, "f0");
    }

    #[test]
    fn same_rows_both_sides_is_not_drift() {
        let (tr, _) = pair(&DriftSpec::gaussian(800, 10, 3, 8));
        let v = detect_drift(&tr, &tr, &Learner::default(), 0.6, 1).unwrap();
        assert!((v.auc - 0.5).abs() < 0.06, "{}", v.auc);
        assert!(!v.drifted);
    }

    #[test]
    fn swapping_sides_reverses_ranking() {
        let (tr, te) = pair(&DriftSpec::gaussian(700, 500, 3, 3).with_mean_shift("f1", 0.7));
        let ps = propensity_oof(&tr, &te, &Learner::default(), 5, 4).unwrap();
        let sw = propensity_oof(&te, &tr, &Learner::default(), 5, 4).unwrap();
        // put the swapped scores back in the original stacking order
        let mut swapped = sw.test_scores.clone();
        swapped.extend_from_slice(&sw.train_scores);
        let (_, z) = stack_adversarial(&tr, &te).unwrap();
        let reversed = auc(&swapped, &z).unwrap();
        assert!((reversed - (1.0 - ps.cv_auc)).abs() < 0.03, "{reversed} vs {}", ps.cv_auc);
    }

    #[test]
    fn constant_column_changes_nothing() {
        let (tr, te) = pair(&DriftSpec::gaussian(600, 400, 3, 6).with_mean_shift("f2", 0.5));
        let tr_c = tr.with_column("const", vec![1.0; tr.n_rows()]).unwrap();
        let te_c = te.with_column("const", vec![1.0; te.n_rows()]).unwrap();
        for learner in [LearnerKind::Dt, LearnerKind::Gbdt] {
            let learner = Learner::from(learner);
            let a = propensity_oof(&tr, &te, &learner, 5, 9).unwrap();
            let b = propensity_oof(&tr_c, &te_c, &learner, 5, 9).unwrap();
            assert_eq!(a.cv_auc, b.cv_auc);
            let va = detect_drift(&tr, &te, &learner, 0.6, 9).unwrap();
            let vb = detect_drift(&tr_c, &te_c, &learner, 0.6, 9).unwrap();
            assert_eq!((va.auc, va.drifted), (vb.auc, vb.drifted));
        }
    }
}
