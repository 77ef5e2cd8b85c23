use rand::seq::{index, SliceRandom};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::binning::{BinnedMatrix, MISSING_BIN};
use super::{
    check_xy, prepare_weights, sigmoid, LearnerKind, ModelParams, Node, Tree, TreeEnsembleModel,
};
use crate::data::EncodedMatrix;
use crate::error::{Error, Result};
use crate::metrics::log_loss;
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GrowthCap {
    /// Leaf-wise growth limited to this depth.
    MaxDepth(usize),
    /// Leaf-wise growth limited to this many leaves.
    NumLeaves(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GBDTParams {
    pub growth: GrowthCap,
    pub learning_rate: f64,
    pub max_rounds: usize,
    /// Fraction of rows bagged each round.
    pub row_subsample: f64,
    /// Fraction of features sampled per tree.
    pub feature_subsample: f64,
    pub l1_reg: f64,
    pub l2_reg: f64,
    pub early_stopping_rounds: usize,
    pub histogram_bins: usize,
    pub min_data_in_leaf: usize,
    pub min_sum_hessian_in_leaf: f64,
    /// Share of rows held out for early stopping when no holdout is given.
    pub holdout_fraction: f64,
    pub seed: u64,
}

impl Default for GBDTParams {
    fn default() -> Self {
        GBDTParams {
            growth: GrowthCap::MaxDepth(5),
            learning_rate: 0.1,
            max_rounds: 500,
            row_subsample: 0.5,
            feature_subsample: 0.8,
            l1_reg: 1.0,
            l2_reg: 1.0,
            early_stopping_rounds: 10,
            histogram_bins: 255,
            min_data_in_leaf: 20,
            min_sum_hessian_in_leaf: 1e-3,
            holdout_fraction: 0.25,
            seed: 0,
        }
    }
}

impl GBDTParams {
    /// The in-house parameter row: leaf-capped trees, no subsampling.
    pub fn num_leaves(leaves: usize) -> Self {
        GBDTParams {
            growth: GrowthCap::NumLeaves(leaves),
            row_subsample: 1.0,
            feature_subsample: 1.0,
            ..GBDTParams::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParameter(m.into()));
        match self.growth {
            GrowthCap::MaxDepth(0) => return bad("max_depth must be >= 1"),
            GrowthCap::NumLeaves(n) if n < 2 => return bad("num_leaves must be >= 2"),
            _ => {}
        }
        if !(0.0..=1.0).contains(&self.learning_rate) {
            return bad("learning_rate must be in [0, 1]");
        }
        if !(self.row_subsample > 0.0 && self.row_subsample <= 1.0) {
            return bad("row_subsample must be in (0, 1]");
        }
        if !(self.feature_subsample > 0.0 && self.feature_subsample <= 1.0) {
            return bad("feature_subsample must be in (0, 1]");
        }
        if !(self.l1_reg >= 0.0 && self.l2_reg >= 0.0) {
            return bad("regularization must be >= 0");
        }
        if !(self.holdout_fraction > 0.0 && self.holdout_fraction < 1.0) {
            return bad("holdout_fraction must be in (0, 1)");
        }
        if self.histogram_bins < 2 {
            return bad("histogram_bins must be >= 2");
        }
        Ok(())
    }
}

/// Explicit early-stopping data.
#[derive(Debug, Clone, Copy)]
pub struct Holdout<'a> {
    pub x: &'a EncodedMatrix,
    pub y: &'a [u8],
    pub w: Option<&'a [f64]>,
}

/// Boosted trees on binary log-loss with histogram split search, learned
/// missing-value directions, and early stopping on holdout log-loss.
///
/// Without `val`, a stratified `holdout_fraction` of the rows is held out.
pub fn fit_gbdt(
    x: &EncodedMatrix,
    y: &[u8],
    w: Option<&[f64]>,
    p: &GBDTParams,
    val: Option<Holdout<'_>>,
) -> Result<TreeEnsembleModel> {
    p.validate()?;
    check_xy(x, y)?;
    let w = prepare_weights(x.n_rows(), w)?;
    match val {
        Some(h) => {
            if h.x.feature_names() != x.feature_names() {
                return Err(Error::FeatureMismatch("holdout features differ from training".into()));
            }
            check_xy(h.x, h.y)?;
            let hw = prepare_weights(h.x.n_rows(), h.w)?;
            boost(x, y, &w, Some((h.x, h.y, &hw)), p)
        }
        None => {
            let (fit_rows, hold_rows) =
                stratified_holdout(y, p.holdout_fraction, rng::derive(p.seed, rng::TAG_HOLDOUT));
            let xt = x.select_rows(&fit_rows);
            let yt: Vec<u8> = fit_rows.iter().map(|&r| y[r]).collect();
            let wt: Vec<f64> = fit_rows.iter().map(|&r| w[r]).collect();
            if hold_rows.is_empty() {
                return boost(&xt, &yt, &wt, None, p);
            }
            let xh = x.select_rows(&hold_rows);
            let yh: Vec<u8> = hold_rows.iter().map(|&r| y[r]).collect();
            let wh: Vec<f64> = hold_rows.iter().map(|&r| w[r]).collect();
            if wh.iter().all(|&v| v == 0.0) {
                return boost(&xt, &yt, &wt, None, p);
            }
            boost(&xt, &yt, &wt, Some((&xh, &yh, &wh)), p)
        }
    }
}

/// Seeded per-class shuffle; returns (fit rows, holdout rows), both ascending.
pub(crate) fn stratified_holdout(y: &[u8], frac: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut r = rng::rng(seed);
    let mut fit = Vec::new();
    let mut hold = Vec::new();
    for class in [0u8, 1] {
        let mut idx: Vec<usize> = (0..y.len()).filter(|&i| y[i] == class).collect();
        idx.shuffle(&mut r);
        let k = (idx.len() as f64 * frac).round() as usize;
        let k = k.min(idx.len().saturating_sub(1));
        hold.extend_from_slice(&idx[..k]);
        fit.extend_from_slice(&idx[k..]);
    }
    fit.sort_unstable();
    hold.sort_unstable();
    (fit, hold)
}

#[derive(Debug, Clone, Copy, Default)]
struct BinStat {
    g: f64,
    h: f64,
    n: u32,
}

impl BinStat {
    fn add(&mut self, o: &BinStat) {
        self.g += o.g;
        self.h += o.h;
        self.n += o.n;
    }
    fn sub(&self, o: &BinStat) -> BinStat {
        BinStat {
            g: self.g - o.g,
            h: self.h - o.h,
            n: self.n - o.n,
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct SplitCand {
    /// Position in the tree's sampled feature list.
    slot: usize,
    bin: usize,
    default_left: bool,
    gain: f64,
}

struct Leaf {
    node: usize,
    depth: usize,
    rows: Vec<u32>,
    /// Per sampled feature: value bins followed by the missing bin.
    hist: Vec<Vec<BinStat>>,
    total: BinStat,
    best: Option<SplitCand>,
}

struct Grower<'a> {
    binned: &'a BinnedMatrix,
    grad: &'a [f64],
    hess: &'a [f64],
    features: &'a [usize],
    p: &'a GBDTParams,
}

fn threshold_l1(g: f64, alpha: f64) -> f64 {
    g.signum() * (g.abs() - alpha).max(0.0)
}

impl Grower<'_> {
    fn score(&self, s: &BinStat) -> f64 {
        let t = threshold_l1(s.g, self.p.l1_reg);
        t * t / (s.h + self.p.l2_reg)
    }

    fn leaf_value(&self, s: &BinStat) -> f64 {
        -threshold_l1(s.g, self.p.l1_reg) / (s.h + self.p.l2_reg) * self.p.learning_rate
    }

    fn histogram(&self, rows: &[u32]) -> Vec<Vec<BinStat>> {
        self.features
            .par_iter()
            .map(|&f| {
                let nb = self.binned.mappers[f].n_bins();
                let mut hist = vec![BinStat::default(); nb + 1];
                let bins = &self.binned.bins[f];
                for &r in rows {
                    let r = r as usize;
                    let b = bins[r];
                    let slot = if b == MISSING_BIN { nb } else { b as usize };
                    let e = &mut hist[slot];
                    e.g += self.grad[r];
                    e.h += self.hess[r];
                    e.n += 1;
                }
                hist
            })
            .collect()
    }

    fn legal(&self, s: &BinStat) -> bool {
        s.n as usize >= self.p.min_data_in_leaf && s.h >= self.p.min_sum_hessian_in_leaf
    }

    fn best_split(&self, leaf: &Leaf) -> Option<SplitCand> {
        if let GrowthCap::MaxDepth(m) = self.p.growth {
            if leaf.depth >= m {
                return None;
            }
        }
        let parent_score = self.score(&leaf.total);
        let mut best: Option<SplitCand> = None;
        for (slot, hist) in leaf.hist.iter().enumerate() {
            let nb = hist.len() - 1;
            let miss = hist[nb];
            let mut values = BinStat::default();
            for b in &hist[..nb] {
                values.add(b);
            }
            let mut left = BinStat::default();
            for b in 0..nb {
                left.add(&hist[b]);
                let right = values.sub(&left);
                let mut options: [(bool, BinStat, BinStat); 2] = [(true, left, right); 2];
                let n_opts = if miss.n == 0 {
                    if b + 1 == nb {
                        break;
                    }
                    1
                } else {
                    let mut l = left;
                    l.add(&miss);
                    let mut r = right;
                    r.add(&miss);
                    options[0] = (true, l, right);
                    options[1] = (false, left, r);
                    if b + 1 == nb {
                        // all values left, missing right
                        options[0] = options[1];
                        1
                    } else {
                        2
                    }
                };
                for &(default_left, l, r) in &options[..n_opts] {
                    if !self.legal(&l) || !self.legal(&r) {
                        continue;
                    }
                    let gain = self.score(&l) + self.score(&r) - parent_score;
                    if gain > 0.0 && best.is_none_or(|c| gain > c.gain) {
                        best = Some(SplitCand {
                            slot,
                            bin: b,
                            default_left,
                            gain,
                        });
                    }
                }
            }
        }
        best
    }

    /// Grows one tree over `rows`; `None` when the root cannot be split.
    fn grow(&self, rows: Vec<u32>) -> Option<Tree> {
        let hist = self.histogram(&rows);
        let total = hist
            .first()
            .map(|h| {
                let mut t = BinStat::default();
                for b in h {
                    t.add(b);
                }
                t
            })
            .unwrap_or_default();
        let mut root = Leaf {
            node: 0,
            depth: 0,
            rows,
            hist,
            total,
            best: None,
        };
        root.best = self.best_split(&root);
        root.best?;

        let mut nodes = vec![Node::Leaf {
            value: 0.0,
            samples: root.rows.len(),
        }];
        let mut leaves = vec![root];
        loop {
            if let GrowthCap::NumLeaves(k) = self.p.growth {
                if leaves.len() >= k {
                    break;
                }
            }
            let pick = leaves
                .iter()
                .enumerate()
                .filter_map(|(i, l)| l.best.map(|b| (i, b.gain, l.node)))
                .max_by(|a, b| a.1.total_cmp(&b.1).then(b.2.cmp(&a.2)));
            let Some((i, _, _)) = pick else { break };
            let leaf = leaves.swap_remove(i);
            let split = leaf.best.unwrap();
            let feature = self.features[split.slot];
            let bins = &self.binned.bins[feature];
            let (l_rows, r_rows): (Vec<u32>, Vec<u32>) = leaf.rows.iter().partition(|&&r| {
                let b = bins[r as usize];
                if b == MISSING_BIN {
                    split.default_left
                } else {
                    b as usize <= split.bin
                }
            });

            let (small, small_is_left) = if l_rows.len() <= r_rows.len() {
                (&l_rows, true)
            } else {
                (&r_rows, false)
            };
            let small_hist = self.histogram(small);
            let large_hist: Vec<Vec<BinStat>> = leaf
                .hist
                .iter()
                .zip(&small_hist)
                .map(|(ph, sh)| ph.iter().zip(sh).map(|(a, b)| a.sub(b)).collect())
                .collect();
            let (l_hist, r_hist) = if small_is_left {
                (small_hist, large_hist)
            } else {
                (large_hist, small_hist)
            };
            let sum = |h: &Vec<Vec<BinStat>>| {
                let mut t = BinStat::default();
                for b in &h[0] {
                    t.add(b);
                }
                t
            };

            let left_node = nodes.len();
            let right_node = left_node + 1;
            nodes.push(Node::Leaf {
                value: 0.0,
                samples: l_rows.len(),
            });
            nodes.push(Node::Leaf {
                value: 0.0,
                samples: r_rows.len(),
            });
            nodes[leaf.node] = Node::Split {
                feature,
                threshold: self.binned.mappers[feature].threshold(split.bin),
                default_left: split.default_left,
                left: left_node,
                right: right_node,
                gain: split.gain,
                samples: leaf.rows.len(),
            };
            for (node, rows, hist) in [(left_node, l_rows, l_hist), (right_node, r_rows, r_hist)] {
                let mut child = Leaf {
                    node,
                    depth: leaf.depth + 1,
                    total: sum(&hist),
                    rows,
                    hist,
                    best: None,
                };
                child.best = self.best_split(&child);
                leaves.push(child);
            }
        }
        for leaf in &leaves {
            nodes[leaf.node] = Node::Leaf {
                value: self.leaf_value(&leaf.total),
                samples: leaf.rows.len(),
            };
        }
        Some(Tree { nodes })
    }
}

fn boost(
    x: &EncodedMatrix,
    y: &[u8],
    w: &[f64],
    holdout: Option<(&EncodedMatrix, &[u8], &[f64])>,
    p: &GBDTParams,
) -> Result<TreeEnsembleModel> {
    let n = x.n_rows();
    let d = x.n_features();
    let binned = BinnedMatrix::build(x, p.histogram_bins);

    let wsum: f64 = w.iter().sum();
    let pos: f64 = w.iter().zip(y).filter(|(_, &l)| l == 1).map(|(w, _)| w).sum();
    let prior = if wsum > 0.0 { pos / wsum } else { 0.5 }.clamp(1e-15, 1.0 - 1e-15);
    let base_score = (prior / (1.0 - prior)).ln();

    let holdout = holdout.filter(|(_, hy, _)| {
        let ok = hy.contains(&0) && hy.contains(&1);
        if !ok {
            log::warn!("holdout has a single class; training {} rounds without early stopping", p.max_rounds);
        }
        ok
    });

    let mut raw = vec![base_score; n];
    let mut hold_raw = holdout.map(|(hx, _, _)| vec![base_score; hx.n_rows()]);
    let hold_loss = |hr: &[f64]| {
        let (_, hy, hw) = holdout.unwrap();
        let probs: Vec<f64> = hr.iter().map(|&z| sigmoid(z)).collect();
        log_loss(&probs, hy, Some(hw))
    };
    let mut losses = Vec::new();
    if let Some(hr) = &hold_raw {
        losses.push(hold_loss(hr));
    }
    let mut best_round = 0usize;

    let n_bag = ((n as f64 * p.row_subsample).round() as usize).clamp(1, n);
    // columns with a single value bin and no missing cells can never split;
    // leaving them out of the sampling pool keeps the draws independent of them
    let pool: Vec<usize> = (0..d)
        .filter(|&j| binned.mappers[j].n_bins() > 1 || binned.bins[j].contains(&MISSING_BIN))
        .collect();
    let n_feat = ((pool.len() as f64 * p.feature_subsample).round() as usize).clamp(1, pool.len().max(1));
    let mut grad = vec![0.0; n];
    let mut hess = vec![0.0; n];
    let mut trees = Vec::new();

    for round in 0..p.max_rounds {
        for i in 0..n {
            let pr = sigmoid(raw[i]);
            grad[i] = w[i] * (pr - f64::from(y[i]));
            hess[i] = w[i] * pr * (1.0 - pr);
        }
        let rows: Vec<u32> = if n_bag == n {
            (0..n as u32).collect()
        } else {
            let mut r = rng::stream(rng::derive(p.seed, rng::TAG_BAGGING), round as u64);
            let mut v: Vec<u32> = index::sample(&mut r, n, n_bag).into_iter().map(|i| i as u32).collect();
            v.sort_unstable();
            v
        };
        let features: Vec<usize> = if n_feat >= pool.len() {
            pool.clone()
        } else {
            let mut r = rng::stream(rng::derive(p.seed, rng::TAG_COLSAMPLE), round as u64);
            let mut v: Vec<usize> = index::sample(&mut r, pool.len(), n_feat).into_iter().map(|i| pool[i]).collect();
            v.sort_unstable();
            v
        };
        let grower = Grower {
            binned: &binned,
            grad: &grad,
            hess: &hess,
            features: &features,
            p,
        };
        let Some(tree) = grower.grow(rows) else {
            log::debug!("no splittable leaves at round {round}; stopping");
            break;
        };
        for (i, r) in raw.iter_mut().enumerate() {
            *r += tree.predict_row(x, i);
        }
        trees.push(tree);

        if let (Some(hr), Some((hx, _, _))) = (hold_raw.as_mut(), holdout) {
            let t = trees.last().unwrap();
            for (i, r) in hr.iter_mut().enumerate() {
                *r += t.predict_row(hx, i);
            }
            let loss = hold_loss(hr);
            losses.push(loss);
            if loss < losses[best_round] {
                best_round = trees.len();
            }
            if trees.len() - best_round >= p.early_stopping_rounds {
                break;
            }
        }
    }

    let early_stopping = hold_raw.is_some();
    let best_iteration = if early_stopping { best_round } else { trees.len() };
    debug_assert!(losses.iter().skip(best_round + 1).all(|&l| losses[best_round] <= l));
    let mut model = TreeEnsembleModel::new(
        LearnerKind::Gbdt,
        ModelParams::Gbdt(*p),
        x.feature_names().to_vec(),
        trees,
    );
    model.base_score = base_score;
    model.best_iteration = Some(best_iteration);
    model.holdout_loss = losses;
    model.early_stopping = early_stopping;
    model.recompute_importance();
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::auc;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    pub(crate) fn assert_early_stopping_invariant(m: &TreeEnsembleModel) {
        if !m.early_stopping {
            return;
        }
        let best = m.best_iteration.unwrap();
        for (r, &l) in m.holdout_loss.iter().enumerate().skip(best + 1) {
            assert!(m.holdout_loss[best] <= l, "round {r}: {l} < best {}", m.holdout_loss[best]);
        }
        assert_eq!(m.holdout_loss.len(), m.trees.len() + 1);
    }

    fn synthetic(seed: u64, n: usize, d: usize, signal: f64) -> (EncodedMatrix, Vec<u8>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cols: Vec<Vec<f64>> = (0..d)
            .map(|_| (0..n).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect())
            .collect();
        let y = (0..n)
            .map(|i| u8::from(rng.random::<f64>() < sigmoid(signal * cols[0][i])))
            .collect();
        let names = (0..d).map(|j| format!("f{j}")).collect();
        (EncodedMatrix::from_columns(names, cols).unwrap(), y)
    }

    #[test]
    fn step_function_label_is_learned() {
        // a two-decimal grid keeps every distinct value in its own bin
        let grid = |x: EncodedMatrix| {
            let mut cols: Vec<Vec<f64>> = (0..x.n_features()).map(|j| x.column(j).to_vec()).collect();
            cols[1].iter_mut().for_each(|v| *v = (*v * 100.0).round() / 100.0);
            EncodedMatrix::from_columns(x.feature_names().to_vec(), cols).unwrap()
        };
        let x = grid(synthetic(1, 2000, 3, 0.0).0);
        let y: Vec<u8> = (0..2000).map(|i| u8::from(x.value(i, 1) > 0.2)).collect();
        let hx = grid(synthetic(2, 500, 3, 0.0).0);
        let hy: Vec<u8> = (0..500).map(|i| u8::from(hx.value(i, 1) > 0.2)).collect();
        let p = GBDTParams::default();
        let m = fit_gbdt(
            &x,
            &y,
            None,
            &p,
            Some(Holdout {
                x: &hx,
                y: &hy,
                w: None,
            }),
        )
        .unwrap();
        assert_eq!(auc(&m.predict_proba(&hx).unwrap(), &hy).unwrap(), 1.0);
        assert!(m.best_iteration.unwrap() <= p.max_rounds);
        assert_early_stopping_invariant(&m);
    }

    #[test]
    fn zero_learning_rate_predicts_prior() {
        let (x, y) = synthetic(3, 800, 2, 3.0);
        let p = GBDTParams {
            learning_rate: 0.0,
            ..GBDTParams::default()
        };
        let m = fit_gbdt(&x, &y, None, &p, None).unwrap();
        let preds = m.predict_proba(&x).unwrap();
        let prior = sigmoid(m.base_score);
        assert!(preds.iter().all(|&v| v == prior));
        assert_early_stopping_invariant(&m);
    }

    #[test]
    fn fully_missing_column_has_no_importance() {
        let (x, y) = synthetic(4, 1000, 2, 4.0);
        let x = x.with_column("empty", vec![0.0; 1000]).unwrap();
        let rows: Vec<Vec<f64>> = (0..1000)
            .map(|i| vec![x.value(i, 0), x.value(i, 1), f64::NAN])
            .collect();
        let x = EncodedMatrix::from_rows(x.feature_names().to_vec(), &rows).unwrap();
        let m = fit_gbdt(&x, &y, None, &GBDTParams::default(), None).unwrap();
        assert_eq!(m.gain_importance()[2], 0.0);
        assert!(m.gain_importance()[0] > 0.5);
        assert_early_stopping_invariant(&m);
    }

    #[test]
    fn missing_rows_follow_default_direction() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 3000;
        let mut rows = Vec::new();
        let mut y = Vec::new();
        for _ in 0..n {
            let v: f64 = rng.random();
            let miss = rng.random::<f64>() < 0.2;
            // missing cells behave like large values
            let label = if miss { rng.random::<f64>() < 0.9 } else { rng.random::<f64>() < v };
            rows.push(vec![if miss { f64::NAN } else { v }]);
            y.push(u8::from(label));
        }
        let x = EncodedMatrix::from_rows(vec!["v".into()], &rows).unwrap();
        let m = fit_gbdt(&x, &y, None, &GBDTParams::default(), None).unwrap();
        for t in &m.trees {
            for (i, row) in rows.iter().enumerate() {
                if row[0].is_nan() {
                    let mut node = 0;
                    while let Node::Split {
                        default_left,
                        left,
                        right,
                        ..
                    } = &t.nodes[node]
                    {
                        let next = if *default_left { *left } else { *right };
                        node = next;
                    }
                    assert_eq!(node, t.leaf_index(&x, i));
                }
            }
        }
        let preds = m.predict_proba(&x).unwrap();
        let miss_mean: f64 = preds.iter().zip(&rows).filter(|(_, r)| r[0].is_nan()).map(|(p, _)| p).sum::<f64>()
            / rows.iter().filter(|r| r[0].is_nan()).count() as f64;
        assert!(miss_mean > 0.75, "{miss_mean}");
        assert_early_stopping_invariant(&m);
    }

    #[test]
    fn equal_weights_match_unweighted() {
        let (x, y) = synthetic(6, 1500, 4, 2.0);
        let p = GBDTParams {
            seed: 9,
            ..GBDTParams::default()
        };
        let a = fit_gbdt(&x, &y, None, &p, None).unwrap();
        let b = fit_gbdt(&x, &y, Some(&vec![0.37; 1500]), &p, None).unwrap();
        assert_eq!(a.to_json(), b.to_json());
        assert_early_stopping_invariant(&a);
    }

    #[test]
    fn seeded_fit_is_bit_identical_and_round_trips() {
        let (x, y) = synthetic(7, 1500, 4, 2.0);
        let p = GBDTParams {
            seed: 3,
            ..GBDTParams::default()
        };
        let a = fit_gbdt(&x, &y, None, &p, None).unwrap();
        let b = fit_gbdt(&x, &y, None, &p, None).unwrap();
        assert_eq!(a.to_json(), b.to_json());
        let back = TreeEnsembleModel::from_json(&a.to_json()).unwrap();
        assert_eq!(back, a);
        assert_eq!(back.predict_proba(&x).unwrap(), a.predict_proba(&x).unwrap());
    }

    #[test]
    fn num_leaves_cap_is_respected() {
        let (x, y) = synthetic(8, 3000, 5, 3.0);
        let m = fit_gbdt(&x, &y, None, &GBDTParams::num_leaves(15), None).unwrap();
        assert!(m.trees.iter().all(|t| t.n_leaves() <= 15));
        let m = fit_gbdt(&x, &y, None, &GBDTParams::default(), None).unwrap();
        assert!(m.trees.iter().all(|t| t.depth() <= 5));
        assert_early_stopping_invariant(&m);
    }

    #[test]
    fn single_class_holdout_disables_early_stopping() {
        let (x, y) = synthetic(10, 400, 2, 2.0);
        let hx = x.select_rows(&[0, 1, 2, 3]);
        let p = GBDTParams {
            max_rounds: 7,
            ..GBDTParams::default()
        };
        let m = fit_gbdt(
            &x,
            &y,
            None,
            &p,
            Some(Holdout {
                x: &hx,
                y: &[1, 1, 1, 1],
                w: None,
            }),
        )
        .unwrap();
        assert!(!m.early_stopping);
        assert_eq!(m.best_iteration, Some(m.trees.len()));
        assert!(m.trees.len() <= 7);
    }

    #[test]
    fn learning_rate_out_of_range() {
        let (x, y) = synthetic(11, 100, 1, 1.0);
        let p = GBDTParams {
            learning_rate: 1.5,
            ..GBDTParams::default()
        };
        assert!(matches!(fit_gbdt(&x, &y, None, &p, None), Err(Error::InvalidParameter(_))));
    }

    #[test]
    fn holdout_split_is_stratified() {
        let y: Vec<u8> = (0..100).map(|i| u8::from(i < 20)).collect();
        let (fit, hold) = stratified_holdout(&y, 0.25, 1);
        assert_eq!(hold.len(), 25);
        assert_eq!(hold.iter().filter(|&&i| y[i] == 1).count(), 5);
        assert_eq!(fit.len() + hold.len(), 100);
    }
}
