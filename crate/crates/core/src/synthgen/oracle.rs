//! Brute-force reference computations for checking the fast paths.

use crate::data::EncodedMatrix;
use crate::error::{Error, Result};
use crate::trees::DTParams;

/// AUC by counting every (positive, negative) pair: win = 1, tie = 1/2.
pub fn pairwise_auc(scores: &[f64], labels: &[u8]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::LengthMismatch("scores vs labels".into()));
    }
    let pos: Vec<f64> = scores.iter().zip(labels).filter(|(_, &l)| l == 1).map(|(s, _)| *s).collect();
    let neg: Vec<f64> = scores.iter().zip(labels).filter(|(_, &l)| l != 1).map(|(s, _)| *s).collect();
    if pos.is_empty() || neg.is_empty() {
        return Err(Error::SingleClass);
    }
    let mut half_points: u64 = 0;
    for &p in &pos {
        for &n in &neg {
            if p > n {
                half_points += 2;
            } else if p == n {
                half_points += 1;
            }
        }
    }
    Ok(half_points as f64 / 2.0 / (pos.len() as f64 * neg.len() as f64))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleSplit {
    pub feature: usize,
    pub threshold: f64,
    /// Root impurity decrease.
    pub decrease: f64,
}

fn gini(rows: &[usize], y: &[u8], w: &[f64]) -> (f64, f64) {
    let total: f64 = rows.iter().map(|&r| w[r]).sum();
    let ones: f64 = rows.iter().filter(|&&r| y[r] == 1).map(|&r| w[r]).sum();
    if total <= 0.0 {
        return (0.0, 0.0);
    }
    let p1 = ones / total;
    let p0 = 1.0 - p1;
    (1.0 - p0 * p0 - p1 * p1, total)
}

/// Best root split by enumerating every (feature, midpoint threshold) pair.
/// Ties within 1e-12 go to the lowest feature index, then lowest threshold.
pub fn best_split(
    x: &EncodedMatrix,
    y: &[u8],
    w: Option<&[f64]>,
    p: &DTParams,
) -> Option<OracleSplit> {
    let n = x.n_rows();
    let ones = vec![1.0; n];
    let w = w.unwrap_or(&ones);
    let all: Vec<usize> = (0..n).collect();
    let (g_parent, w_parent) = gini(&all, y, w);
    let mut best: Option<OracleSplit> = None;
    for j in 0..x.n_features() {
        let mut values: Vec<f64> = x.column(j).to_vec();
        values.sort_by(f64::total_cmp);
        values.dedup();
        for pair in values.windows(2) {
            let mut t = pair[0] / 2.0 + pair[1] / 2.0;
            if t >= pair[1] || !t.is_finite() {
                t = pair[0];
            }
            let (l, r): (Vec<usize>, Vec<usize>) = all.iter().partition(|&&i| x.value(i, j) <= t);
            if l.len() < p.min_samples_leaf || r.len() < p.min_samples_leaf {
                continue;
            }
            let (gl, wl) = gini(&l, y, w);
            let (gr, wr) = gini(&r, y, w);
            let decrease = g_parent - wl / w_parent * gl - wr / w_parent * gr;
            if decrease <= 1e-12 || decrease < p.min_impurity_decrease {
                continue;
            }
            let replace = best.is_none_or(|b| decrease > b.decrease + 1e-12 * b.decrease.abs().max(1.0));
            if replace {
                best = Some(OracleSplit {
                    feature: j,
                    threshold: t,
                    decrease,
                });
            }
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pairwise_example() {
        assert_eq!(pairwise_auc(&[0.1, 0.4, 0.35, 0.8], &[0, 0, 1, 1]).unwrap(), 0.75);
    }

    #[test]
    fn separable_four_rows() {
        let x = EncodedMatrix::from_columns(
            vec!["a".into(), "b".into()],
            vec![vec![0.0, 1.0, 0.0, 1.0], vec![3.0, 1.0, 4.0, 2.0]],
        )
        .unwrap();
        let p = DTParams {
            min_samples_leaf: 1,
            min_impurity_decrease: 0.0,
            max_depth: None,
        };
        let s = best_split(&x, &[1, 0, 1, 0], None, &p).unwrap();
        assert_eq!((s.feature, s.threshold), (0, 0.5));
        assert!((s.decrease - 0.5).abs() < 1e-15);
    }
}
