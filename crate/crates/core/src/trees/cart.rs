use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{check_xy, prepare_weights, LearnerKind, ModelParams, Node, Tree, TreeEnsembleModel};
use crate::data::EncodedMatrix;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DTParams {
    pub min_samples_leaf: usize,
    /// Minimum of `W_node / W_root * (gini - W_l/W_node * gini_l - W_r/W_node * gini_r)`.
    pub min_impurity_decrease: f64,
    pub max_depth: Option<usize>,
}

impl Default for DTParams {
    fn default() -> Self {
        DTParams {
            min_samples_leaf: 20,
            min_impurity_decrease: 0.01,
            max_depth: None,
        }
    }
}

impl DTParams {
    pub fn validate(&self) -> Result<()> {
        if self.min_samples_leaf < 1 {
            return Err(Error::InvalidParameter("min_samples_leaf must be >= 1".into()));
        }
        if !(self.min_impurity_decrease >= 0.0) {
            return Err(Error::InvalidParameter("min_impurity_decrease must be >= 0".into()));
        }
        Ok(())
    }
}

/// Fits a weighted-Gini CART classifier over every feature.
pub fn fit_decision_tree(
    x: &EncodedMatrix,
    y: &[u8],
    w: Option<&[f64]>,
    p: &DTParams,
) -> Result<TreeEnsembleModel> {
    p.validate()?;
    check_xy(x, y)?;
    if x.has_missing() {
        return Err(Error::MissingNotSupported);
    }
    let w = prepare_weights(x.n_rows(), w)?;
    let rows: Vec<usize> = (0..x.n_rows()).collect();
    let tree = grow_tree(x, y, &w, &rows, p, None);
    Ok(TreeEnsembleModel::new(
        LearnerKind::Dt,
        ModelParams::Dt(*p),
        x.feature_names().to_vec(),
        vec![tree],
    ))
}

/// Per-node random feature subsampling for forests.
pub(crate) struct FeatureSampler<'a> {
    pub rng: &'a mut ChaCha8Rng,
    pub max_features: usize,
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    feature: usize,
    threshold: f64,
    /// Unnormalized improvement: `W*gini - W_l*gini_l - W_r*gini_r`.
    proxy: f64,
}

const TIE_EPS: f64 = 1e-12;
/// Decreases at or below this are rounding noise, not splits.
pub(crate) const MIN_DECREASE: f64 = 1e-12;

fn better(new: &Candidate, best: &Option<Candidate>) -> bool {
    match best {
        None => true,
        Some(b) => {
            let eps = TIE_EPS * b.proxy.abs().max(1.0);
            new.proxy > b.proxy + eps
                || (new.proxy >= b.proxy - eps
                    && (new.feature, new.threshold) < (b.feature, b.threshold))
        }
    }
}

/// `W * gini` for class weight sums `(w0, w1)`.
fn weighted_gini(w0: f64, w1: f64) -> f64 {
    let t = w0 + w1;
    if t <= 0.0 {
        0.0
    } else {
        t - (w0 * w0 + w1 * w1) / t
    }
}

pub(crate) fn midpoint(lo: f64, hi: f64) -> f64 {
    let m = lo / 2.0 + hi / 2.0;
    if m >= hi || !m.is_finite() {
        lo
    } else {
        m
    }
}

struct Work {
    node: usize,
    sorted: Vec<Vec<usize>>,
    depth: usize,
}

/// Grows one tree on `rows` (duplicates not allowed; use weights for counts).
pub(crate) fn grow_tree(
    x: &EncodedMatrix,
    y: &[u8],
    w: &[f64],
    rows: &[usize],
    p: &DTParams,
    mut sampler: Option<FeatureSampler<'_>>,
) -> Tree {
    let d = x.n_features();
    let root_w: f64 = rows.iter().map(|&r| w[r]).sum();
    let sorted: Vec<Vec<usize>> = (0..d)
        .map(|j| {
            let col = x.column(j);
            let mut s = rows.to_vec();
            s.sort_by(|&a, &b| col[a].total_cmp(&col[b]).then(a.cmp(&b)));
            s
        })
        .collect();

    let mut nodes = vec![Node::Leaf {
        value: 0.0,
        samples: rows.len(),
    }];
    let mut goes_left = vec![false; x.n_rows()];
    let mut feature_order: Vec<usize> = (0..d).collect();
    let mut stack = vec![Work {
        node: 0,
        sorted,
        depth: 0,
    }];

    while let Some(Work { node, sorted, depth }) = stack.pop() {
        let node_rows = &sorted[0];
        let n = node_rows.len();
        let (mut w0, mut w1) = (0.0, 0.0);
        for &r in node_rows {
            if y[r] == 1 {
                w1 += w[r];
            } else {
                w0 += w[r];
            }
        }
        let total = w0 + w1;
        let value = if total > 0.0 { w1 / total } else { 0.0 };
        nodes[node] = Node::Leaf { value, samples: n };

        let parent = weighted_gini(w0, w1);
        let depth_ok = p.max_depth.is_none_or(|m| depth < m);
        if !depth_ok || n < 2 || n < 2 * p.min_samples_leaf || parent <= f64::EPSILON * total {
            continue;
        }

        let mut best: Option<Candidate> = None;
        let mut evaluated = 0;
        if let Some(s) = sampler.as_mut() {
            feature_order.shuffle(s.rng);
        }
        for &j in &feature_order {
            if let Some(s) = &sampler {
                if evaluated >= s.max_features && best.is_some() {
                    break;
                }
            }
            evaluated += 1;
            let col = x.column(j);
            let order = &sorted[j];
            let (mut l0, mut l1) = (0.0, 0.0);
            for i in 0..n - 1 {
                let r = order[i];
                if y[r] == 1 {
                    l1 += w[r];
                } else {
                    l0 += w[r];
                }
                let lo = col[r];
                let hi = col[order[i + 1]];
                let n_left = i + 1;
                if lo >= hi || n_left < p.min_samples_leaf || n - n_left < p.min_samples_leaf {
                    continue;
                }
                let proxy = parent - weighted_gini(l0, l1) - weighted_gini(w0 - l0, w1 - l1);
                let cand = Candidate {
                    feature: j,
                    threshold: midpoint(lo, hi),
                    proxy,
                };
                if better(&cand, &best) {
                    best = Some(cand);
                }
            }
        }
        if sampler.is_some() {
            feature_order.sort_unstable();
        }

        let Some(best) = best else { continue };
        let decrease = best.proxy / root_w;
        if !(decrease >= p.min_impurity_decrease) || decrease <= MIN_DECREASE {
            continue;
        }

        let col = x.column(best.feature);
        for &r in &sorted[0] {
            goes_left[r] = col[r] <= best.threshold;
        }
        let (mut left_sorted, mut right_sorted) = (Vec::with_capacity(d), Vec::with_capacity(d));
        for list in sorted {
            let (l, r): (Vec<usize>, Vec<usize>) = list.into_iter().partition(|&r| goes_left[r]);
            left_sorted.push(l);
            right_sorted.push(r);
        }
        let left = nodes.len();
        let right = left + 1;
        nodes.push(Node::Leaf {
            value: 0.0,
            samples: left_sorted[0].len(),
        });
        nodes.push(Node::Leaf {
            value: 0.0,
            samples: right_sorted[0].len(),
        });
        nodes[node] = Node::Split {
            feature: best.feature,
            threshold: best.threshold,
            default_left: true,
            left,
            right,
            gain: decrease,
            samples: n,
        };
        stack.push(Work {
            node: right,
            sorted: right_sorted,
            depth: depth + 1,
        });
        stack.push(Work {
            node: left,
            sorted: left_sorted,
            depth: depth + 1,
        });
    }
    Tree { nodes }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::auc;
    use crate::synthgen::oracle;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    fn matrix(cols: Vec<Vec<f64>>) -> EncodedMatrix {
        let names = (0..cols.len()).map(|j| format!("f{j}")).collect();
        EncodedMatrix::from_columns(names, cols).unwrap()
    }

    fn root_split(m: &TreeEnsembleModel) -> Option<(usize, f64)> {
        match &m.trees[0].nodes[0] {
            Node::Split {
                feature, threshold, ..
            } => Some((*feature, *threshold)),
            Node::Leaf { .. } => None,
        }
    }

    #[test]
    fn single_class_is_a_leaf() {
        let x = matrix(vec![(0..40).map(f64::from).collect()]);
        let m = fit_decision_tree(&x, &[0; 40], None, &DTParams::default()).unwrap();
        assert_eq!(m.trees[0].nodes.len(), 1);
        assert_eq!(m.predict_proba(&x).unwrap(), vec![0.0; 40]);
    }

    #[test]
    fn too_few_rows_for_two_leaves() {
        let x = matrix(vec![(0..39).map(f64::from).collect()]);
        let y: Vec<u8> = (0..39).map(|i| u8::from(i >= 19)).collect();
        let m = fit_decision_tree(&x, &y, None, &DTParams::default()).unwrap();
        assert_eq!(m.trees[0].nodes.len(), 1);
    }

    #[test]
    fn four_rows_match_oracle() {
        let x = matrix(vec![vec![1.0, 2.0, 3.0, 4.0], vec![0.0, 1.0, 0.0, 1.0]]);
        let y = [0, 0, 1, 1];
        let p = DTParams {
            min_samples_leaf: 1,
            min_impurity_decrease: 0.0,
            max_depth: None,
        };
        let m = fit_decision_tree(&x, &y, None, &p).unwrap();
        let o = oracle::best_split(&x, &y, None, &p).unwrap();
        assert_eq!(root_split(&m), Some((o.feature, o.threshold)));
        assert_eq!(root_split(&m), Some((0, 2.5)));
    }

    #[test]
    fn missing_cells_rejected() {
        let x = EncodedMatrix::from_rows(vec!["a".into()], &[vec![1.0], vec![f64::NAN]]).unwrap();
        assert!(matches!(
            fit_decision_tree(&x, &[0, 1], None, &DTParams::default()),
            Err(Error::MissingNotSupported)
        ));
    }

    #[test]
    fn empty_data_rejected() {
        let x = matrix(vec![vec![]]);
        assert!(matches!(
            fit_decision_tree(&x, &[], None, &DTParams::default()),
            Err(Error::EmptyData(_))
        ));
    }

    fn random_instance(seed: u64, n: usize, d: usize) -> (EncodedMatrix, Vec<u8>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cols = (0..d)
            .map(|_| (0..n).map(|_| f64::from(rng.random_range(0..6u8))).collect())
            .collect();
        let y = (0..n).map(|_| rng.random_range(0..2u8)).collect();
        (matrix(cols), y)
    }

    /// Routes training rows through the tree and checks every split's legality.
    fn assert_legal(m: &TreeEnsembleModel, x: &EncodedMatrix, y: &[u8], p: &DTParams) {
        let tree = &m.trees[0];
        let mut members: Vec<Vec<usize>> = vec![Vec::new(); tree.nodes.len()];
        members[0] = (0..x.n_rows()).collect();
        let n_root = x.n_rows() as f64;
        for i in 0..tree.nodes.len() {
            if let Node::Split {
                feature,
                threshold,
                left,
                right,
                gain,
                ..
            } = &tree.nodes[i]
            {
                let (l, r): (Vec<usize>, Vec<usize>) =
                    members[i].iter().partition(|&&row| x.value(row, *feature) <= *threshold);
                assert!(l.len() >= p.min_samples_leaf && r.len() >= p.min_samples_leaf);
                let g = |rows: &[usize]| {
                    let ones = rows.iter().filter(|&&r| y[r] == 1).count() as f64;
                    let t = rows.len() as f64;
                    1.0 - (ones / t).powi(2) - ((t - ones) / t).powi(2)
                };
                let nt = members[i].len() as f64;
                let dec = nt / n_root
                    * (g(&members[i]) - l.len() as f64 / nt * g(&l) - r.len() as f64 / nt * g(&r));
                assert!(dec >= p.min_impurity_decrease - 1e-12, "{dec}");
                assert!((dec - gain).abs() < 1e-9);
                members[*left] = l;
                members[*right] = r;
            }
        }
    }

    #[test]
    fn splits_are_legal() {
        for seed in 0..20 {
            let (x, y) = random_instance(seed, 300, 3);
            let p = DTParams {
                min_samples_leaf: 7,
                min_impurity_decrease: 0.001,
                max_depth: None,
            };
            let m = fit_decision_tree(&x, &y, None, &p).unwrap();
            assert_legal(&m, &x, &y, &p);
        }
    }

    #[test]
    fn separable_data_fits_perfectly() {
        let x = matrix(vec![(0..200).map(f64::from).collect()]);
        let y: Vec<u8> = (0..200).map(|i| u8::from(i >= 100)).collect();
        let m = fit_decision_tree(&x, &y, None, &DTParams::default()).unwrap();
        assert_eq!(auc(&m.predict_proba(&x).unwrap(), &y).unwrap(), 1.0);
        assert_eq!(root_split(&m), Some((0, 99.5)));
    }

    #[test]
    fn feature_scaling_keeps_ranking() {
        for seed in 0..5 {
            let (x, y) = random_instance(seed, 200, 2);
            let p = DTParams {
                min_samples_leaf: 5,
                ..DTParams::default()
            };
            let base = fit_decision_tree(&x, &y, None, &p).unwrap().predict_proba(&x).unwrap();
            let scaled = matrix(vec![x.column(0).iter().map(|v| v * 3.5).collect(), x.column(1).to_vec()]);
            let after = fit_decision_tree(&scaled, &y, None, &p)
                .unwrap()
                .predict_proba(&scaled)
                .unwrap();
            assert_eq!(base, after);
        }
    }

    proptest! {
        #[test]
        fn root_split_matches_oracle(seed in any::<u64>(), n in 2usize..=30, d in 1usize..=3) {
            let (x, y) = random_instance(seed, n, d);
            let p = DTParams { min_samples_leaf: 1, min_impurity_decrease: 0.0, max_depth: None };
            let m = fit_decision_tree(&x, &y, None, &p).unwrap();
            let o = oracle::best_split(&x, &y, None, &p);
            prop_assert_eq!(root_split(&m), o.map(|o| (o.feature, o.threshold)));
        }

        #[test]
        fn constant_weights_match_unweighted(seed in any::<u64>(), c in 0.01f64..100.0) {
            let (x, y) = random_instance(seed, 120, 3);
            let p = DTParams { min_samples_leaf: 3, min_impurity_decrease: 0.0, max_depth: None };
            let a = fit_decision_tree(&x, &y, None, &p).unwrap();
            let b = fit_decision_tree(&x, &y, Some(&vec![c; 120]), &p).unwrap();
            prop_assert_eq!(a, b);
        }
    }
}
