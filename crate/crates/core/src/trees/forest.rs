use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::cart::{grow_tree, FeatureSampler};
use super::{check_xy, prepare_weights, DTParams, LearnerKind, ModelParams, TreeEnsembleModel};
use crate::data::EncodedMatrix;
use crate::error::{Error, Result};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RFParams {
    pub n_trees: usize,
    /// Features tried per split; `None` means `ceil(sqrt(d))`.
    pub max_features: Option<usize>,
    pub bootstrap: bool,
    pub tree: DTParams,
    pub seed: u64,
}

impl Default for RFParams {
    fn default() -> Self {
        RFParams {
            n_trees: 100,
            max_features: None,
            bootstrap: true,
            tree: DTParams::default(),
            seed: 0,
        }
    }
}

impl RFParams {
    pub fn validate(&self) -> Result<()> {
        if self.n_trees < 1 {
            return Err(Error::InvalidParameter("n_trees must be >= 1".into()));
        }
        if self.max_features == Some(0) {
            return Err(Error::InvalidParameter("max_features must be >= 1".into()));
        }
        self.tree.validate()
    }

    fn features_per_split(&self, d: usize) -> usize {
        self.max_features
            .unwrap_or_else(|| (d as f64).sqrt().ceil() as usize)
            .clamp(1, d)
    }
}

/// Bagged CART ensemble; predictions average the per-tree leaf probabilities.
pub fn fit_random_forest(
    x: &EncodedMatrix,
    y: &[u8],
    w: Option<&[f64]>,
    p: &RFParams,
) -> Result<TreeEnsembleModel> {
    p.validate()?;
    check_xy(x, y)?;
    if x.has_missing() {
        return Err(Error::MissingNotSupported);
    }
    let w = prepare_weights(x.n_rows(), w)?;
    let n = x.n_rows();
    let k = p.features_per_split(x.n_features());

    let trees = (0..p.n_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = rng::stream(rng::derive(p.seed, rng::TAG_TREE), t as u64);
            let (rows, tree_w) = if p.bootstrap {
                let mut counts = vec![0u32; n];
                for _ in 0..n {
                    counts[rng.random_range(0..n)] += 1;
                }
                let rows: Vec<usize> = (0..n).filter(|&r| counts[r] > 0).collect();
                let tw: Vec<f64> = w.iter().zip(&counts).map(|(w, &c)| w * f64::from(c)).collect();
                (rows, tw)
            } else {
                ((0..n).collect(), w.clone())
            };
            grow_tree(
                x,
                y,
                &tree_w,
                &rows,
                &p.tree,
                Some(FeatureSampler {
                    rng: &mut rng,
                    max_features: k,
                }),
            )
        })
        .collect();

    Ok(TreeEnsembleModel::new(
        LearnerKind::Rf,
        ModelParams::Rf(*p),
        x.feature_names().to_vec(),
        trees,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::auc;
    use crate::trees::fit_decision_tree;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn noisy(seed: u64, n: usize, d: usize) -> (EncodedMatrix, Vec<u8>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cols: Vec<Vec<f64>> = (0..d)
            .map(|_| (0..n).map(|_| rng.random::<f64>()).collect())
            .collect();
        let y = (0..n)
            .map(|i| u8::from(cols[0][i] + 0.3 * rng.random::<f64>() > 0.6))
            .collect();
        let names = (0..d).map(|j| format!("f{j}")).collect();
        (EncodedMatrix::from_columns(names, cols).unwrap(), y)
    }

    #[test]
    fn one_tree_without_bootstrap_is_a_decision_tree() {
        let (x, y) = noisy(3, 300, 1);
        let dt = fit_decision_tree(&x, &y, None, &DTParams::default()).unwrap();
        let rf = fit_random_forest(
            &x,
            &y,
            None,
            &RFParams {
                n_trees: 1,
                bootstrap: false,
                ..RFParams::default()
            },
        )
        .unwrap();
        assert_eq!(dt.predict_proba(&x).unwrap(), rf.predict_proba(&x).unwrap());
        assert_eq!(dt.trees, rf.trees);
    }

    #[test]
    fn all_features_without_bootstrap_is_a_decision_tree() {
        let (x, y) = noisy(4, 300, 4);
        let dt = fit_decision_tree(&x, &y, None, &DTParams::default()).unwrap();
        let rf = fit_random_forest(
            &x,
            &y,
            None,
            &RFParams {
                n_trees: 1,
                bootstrap: false,
                max_features: Some(4),
                ..RFParams::default()
            },
        )
        .unwrap();
        assert_eq!(dt.trees, rf.trees);
    }

    #[test]
    fn fixed_seed_is_bit_identical() {
        let (x, y) = noisy(5, 400, 5);
        let p = RFParams {
            n_trees: 10,
            seed: 11,
            ..RFParams::default()
        };
        let a = fit_random_forest(&x, &y, None, &p).unwrap();
        let b = fit_random_forest(&x, &y, None, &p).unwrap();
        assert_eq!(a.to_json(), b.to_json());
        let c = fit_random_forest(&x, &y, None, &RFParams { seed: 12, ..p }).unwrap();
        assert_ne!(a.to_json(), c.to_json());
    }

    #[test]
    fn separable_one_feature() {
        let x = EncodedMatrix::from_columns(vec!["a".into()], vec![(0..200).map(f64::from).collect()])
            .unwrap();
        let y: Vec<u8> = (0..200).map(|i| u8::from(i >= 120)).collect();
        let m = fit_random_forest(&x, &y, None, &RFParams { n_trees: 20, ..RFParams::default() })
            .unwrap();
        assert!(auc(&m.predict_proba(&x).unwrap(), &y).unwrap() >= 0.99);
    }

    #[test]
    fn constant_weights_match_unweighted() {
        let (x, y) = noisy(8, 250, 3);
        let p = RFParams {
            n_trees: 5,
            seed: 2,
            ..RFParams::default()
        };
        let a = fit_random_forest(&x, &y, None, &p).unwrap();
        let b = fit_random_forest(&x, &y, Some(&[2.5; 250]), &p).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn importance_favours_signal_feature() {
        let (x, y) = noisy(9, 600, 4);
        let m = fit_random_forest(&x, &y, None, &RFParams { n_trees: 20, ..RFParams::default() })
            .unwrap();
        assert_eq!(m.ranked_importance()[0].0, "f0");
    }
}
