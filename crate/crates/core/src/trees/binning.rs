//! Quantile histogram bins for boosted-tree split search.

use super::cart::midpoint;
use crate::data::EncodedMatrix;

pub(crate) const MISSING_BIN: u8 = u8::MAX;

/// Upper edges of one feature's value bins. A value `v` lands in the first bin
/// whose edge is `>= v`, so `v <= edges[b]` holds exactly when `bin(v) <= b`.
#[derive(Debug, Clone)]
pub(crate) struct BinMapper {
    pub edges: Vec<f64>,
}

impl BinMapper {
    pub fn fit(values: impl Iterator<Item = f64>, max_bins: usize) -> Self {
        let mut v: Vec<f64> = values.collect();
        v.sort_by(f64::total_cmp);
        let mut distinct: Vec<(f64, usize)> = Vec::new();
        for x in v {
            match distinct.last_mut() {
                Some((last, c)) if *last == x => *c += 1,
                _ => distinct.push((x, 1)),
            }
        }
        let mut edges = Vec::new();
        if distinct.len() <= max_bins {
            for w in distinct.windows(2) {
                edges.push(midpoint(w[0].0, w[1].0));
            }
        } else {
            let total: usize = distinct.iter().map(|d| d.1).sum();
            let per_bin = total as f64 / max_bins as f64;
            let mut cum = 0usize;
            for i in 0..distinct.len() - 1 {
                cum += distinct[i].1;
                // close the bin once its share of rows is reached
                if cum as f64 >= per_bin * (edges.len() + 1) as f64 && edges.len() + 1 < max_bins {
                    edges.push(midpoint(distinct[i].0, distinct[i + 1].0));
                }
            }
        }
        BinMapper { edges }
    }

    /// Number of value bins (at least one).
    pub fn n_bins(&self) -> usize {
        self.edges.len() + 1
    }

    pub fn bin(&self, v: f64) -> u8 {
        self.edges.partition_point(|&e| e < v) as u8
    }

    /// Threshold sending bins `0..=b` left. The last bin maps to `f64::MAX`,
    /// which only separates values from missing cells.
    pub fn threshold(&self, b: usize) -> f64 {
        self.edges.get(b).copied().unwrap_or(f64::MAX)
    }
}

/// Column-major bin codes for the rows of a matrix.
pub(crate) struct BinnedMatrix {
    pub mappers: Vec<BinMapper>,
    pub bins: Vec<Vec<u8>>,
}

impl BinnedMatrix {
    pub fn build(x: &EncodedMatrix, max_bins: usize) -> Self {
        let max_bins = max_bins.clamp(2, MISSING_BIN as usize);
        let (mappers, bins) = (0..x.n_features())
            .map(|j| {
                let col = x.column(j);
                let mask = x.missing_column(j);
                let mapper = BinMapper::fit(
                    col.iter().zip(mask).filter(|(_, &m)| !m).map(|(&v, _)| v),
                    max_bins,
                );
                let b = col
                    .iter()
                    .zip(mask)
                    .map(|(&v, &m)| if m { MISSING_BIN } else { mapper.bin(v) })
                    .collect();
                (mapper, b)
            })
            .unzip();
        BinnedMatrix { mappers, bins }
    }
}
