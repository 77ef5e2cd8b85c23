//! Seeded synthetic train/test tables with known drift.
//!
//! Every column on every side draws from its own `ChaCha8Rng` stream derived
//! from the spec seed (see [`crate::rng`]), so a spec reproduces the same
//! bytes on any platform and thread count.

pub mod oracle;

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution as _, Normal};
use serde::{Deserialize, Serialize};

use crate::data::{write_csv, Column, ColumnKind, Dataset, Schema};
use crate::error::{Error, Result};
use crate::rng;
use crate::trees::sigmoid;

pub const LABEL_COLUMN: &str = "label";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "dist", rename_all = "snake_case")]
pub enum Distribution {
    Normal { mean: f64, std: f64 },
    Uniform { low: f64, high: f64 },
    Categorical { categories: Vec<String>, probs: Vec<f64> },
}

impl Distribution {
    pub fn standard_normal() -> Self {
        Distribution::Normal { mean: 0.0, std: 1.0 }
    }

    fn validate(&self, name: &str) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(format!("feature `{name}`: {m}")));
        match self {
            Distribution::Normal { mean, std } => {
                if !mean.is_finite() || !(std.is_finite() && *std >= 0.0) {
                    return bad(format!("bad normal({mean}, {std})"));
                }
            }
            Distribution::Uniform { low, high } => {
                if !(low.is_finite() && high.is_finite() && low < high) {
                    return bad(format!("bad uniform({low}, {high})"));
                }
            }
            Distribution::Categorical { categories, probs } => {
                if categories.is_empty() || categories.len() != probs.len() {
                    return bad("categories and probs must be nonempty and equal length".into());
                }
                let total: f64 = probs.iter().sum();
                if probs.iter().any(|p| !(p.is_finite() && *p >= 0.0)) || (total - 1.0).abs() > 1e-9 {
                    return bad("probs must be >= 0 and sum to 1".into());
                }
            }
        }
        Ok(())
    }

    fn is_categorical(&self) -> bool {
        matches!(self, Distribution::Categorical { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSpec {
    pub name: String,
    pub train: Distribution,
    /// `None` means the test side matches `train`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub test: Option<Distribution>,
}

impl FeatureSpec {
    pub fn test_distribution(&self) -> &Distribution {
        self.test.as_ref().unwrap_or(&self.train)
    }

    pub fn is_drifted(&self) -> bool {
        self.test.as_ref().is_some_and(|t| *t != self.train)
    }
}

/// `P(y = 1 | x) = sigmoid(intercept + sum coef * x)`. Categorical features
/// contribute their category index. `train_only` terms apply to the
/// training side alone, which plants a correlation that does not carry over.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct LabelRule {
    #[serde(default)]
    pub intercept: f64,
    #[serde(default)]
    pub coefficients: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub train_only: BTreeMap<String, f64>,
}

impl LabelRule {
    pub fn logistic(terms: &[(&str, f64)]) -> Self {
        LabelRule {
            intercept: 0.0,
            coefficients: terms.iter().map(|(n, c)| (n.to_string(), *c)).collect(),
            train_only: BTreeMap::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftSpec {
    pub n_train: usize,
    pub n_test: usize,
    pub features: Vec<FeatureSpec>,
    #[serde(default)]
    pub label: LabelRule,
    #[serde(default)]
    pub seed: u64,
}

impl DriftSpec {
    /// `d` standard-normal features `f0..f{d-1}`, identical on both sides,
    /// with the label driven by `f1` (and `f2` when present).
    pub fn gaussian(n_train: usize, n_test: usize, d: usize, seed: u64) -> Self {
        let features = (0..d)
            .map(|j| FeatureSpec {
                name: format!("f{j}"),
                train: Distribution::standard_normal(),
                test: None,
            })
            .collect();
        let mut terms = Vec::new();
        if d > 1 {
            terms.push(("f1", 1.0));
        }
        if d > 2 {
            terms.push(("f2", -1.0));
        }
        DriftSpec {
            n_train,
            n_test,
            features,
            label: LabelRule::logistic(&terms),
            seed,
        }
    }

    /// Shifts the test-side mean of a normal feature by `shift`.
    pub fn with_mean_shift(mut self, feature: &str, shift: f64) -> Self {
        if let Some(f) = self.features.iter_mut().find(|f| f.name == feature) {
            if let Distribution::Normal { mean, std } = f.train {
                f.test = Some(Distribution::Normal {
                    mean: mean + shift,
                    std,
                });
            }
        }
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn feature_names(&self) -> Vec<String> {
        self.features.iter().map(|f| f.name.clone()).collect()
    }

    pub fn drifted(&self) -> BTreeSet<String> {
        self.features
            .iter()
            .filter(|f| f.is_drifted())
            .map(|f| f.name.clone())
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_train == 0 || self.n_test == 0 {
            return Err(Error::InvalidParameter("n_train and n_test must be >= 1".into()));
        }
        if self.features.is_empty() {
            return Err(Error::InvalidParameter("at least one feature".into()));
        }
        let mut seen = BTreeSet::new();
        for f in &self.features {
            if !seen.insert(f.name.as_str()) {
                return Err(Error::InvalidParameter(format!("duplicate feature `{}`", f.name)));
            }
            f.train.validate(&f.name)?;
            if let Some(t) = &f.test {
                t.validate(&f.name)?;
                if t.is_categorical() != f.train.is_categorical() {
                    return Err(Error::InvalidParameter(format!(
                        "feature `{}` changes kind between sides",
                        f.name
                    )));
                }
            }
        }
        for name in self.label.coefficients.keys().chain(self.label.train_only.keys()) {
            if !seen.contains(name.as_str()) {
                return Err(Error::InvalidParameter(format!(
                    "label rule references unknown feature `{name}`"
                )));
            }
        }
        Ok(())
    }

    pub fn from_toml_str(s: &str) -> Result<Self> {
        let spec: DriftSpec = toml::from_str(s)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("drift spec serializes")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthData {
    pub train: Dataset,
    /// Unlabeled test table.
    pub test: Dataset,
    /// Test outcomes, for evaluation only.
    pub test_labels: Vec<u8>,
    pub ground_truth: BTreeSet<String>,
}

impl SynthData {
    pub fn labeled_test(&self) -> Dataset {
        self.test.clone().with_label(self.test_labels.clone()).expect("same length")
    }

    /// Writes `train.csv`, `test.csv` (unlabeled), `test_labels.csv`,
    /// `schema.toml` and `ground_truth.json` into `dir`.
    pub fn write(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        write_csv(&self.train, Some(LABEL_COLUMN), dir.join("train.csv"))?;
        write_csv(&self.test, None, dir.join("test.csv"))?;
        let labels = dir.join("test_labels.csv");
        let mut text = String::from(LABEL_COLUMN);
        text.push('\n');
        for l in &self.test_labels {
            text.push_str(&format!("{l}\n"));
        }
        fs::write(&labels, text).map_err(|e| Error::io(&labels, e))?;
        Schema::from_dataset(&self.train, Some(LABEL_COLUMN)).save(dir.join("schema.toml"))?;
        let gt = dir.join("ground_truth.json");
        fs::write(&gt, serde_json::to_string_pretty(&self.ground_truth)?)
            .map_err(|e| Error::io(&gt, e))?;
        Ok(())
    }
}

const SIDE_TRAIN: u64 = 0;
const SIDE_TEST: u64 = 1;
const LABEL_STREAM: u64 = 1 << 32;

enum Drawn {
    Numbers(Vec<f64>),
    Codes(Vec<usize>),
}

fn draw(dist: &Distribution, n: usize, seed: u64) -> Result<Drawn> {
    let mut r = rng::rng(seed);
    Ok(match dist {
        Distribution::Normal { mean, std } => {
            let normal = Normal::new(*mean, *std)
                .map_err(|e| Error::InvalidParameter(format!("normal: {e}")))?;
            Drawn::Numbers((0..n).map(|_| normal.sample(&mut r)).collect())
        }
        Distribution::Uniform { low, high } => {
            Drawn::Numbers((0..n).map(|_| r.random_range(*low..*high)).collect())
        }
        Distribution::Categorical { probs, .. } => {
            let mut cdf = Vec::with_capacity(probs.len());
            let mut acc = 0.0;
            for p in probs {
                acc += p;
                cdf.push(acc);
            }
            let last = probs.len() - 1;
            Drawn::Codes(
                (0..n)
                    .map(|_| {
                        let u: f64 = r.random::<f64>() * acc;
                        cdf.partition_point(|&c| c <= u).min(last)
                    })
                    .collect(),
            )
        }
    })
}

fn side(spec: &DriftSpec, side: u64, n: usize) -> Result<(Dataset, Vec<u8>)> {
    let side_seed = rng::derive(spec.seed, side);
    let mut columns = Vec::with_capacity(spec.features.len());
    let mut numeric: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    for (j, f) in spec.features.iter().enumerate() {
        let dist = if side == SIDE_TRAIN { &f.train } else { f.test_distribution() };
        match draw(dist, n, rng::derive(side_seed, j as u64))? {
            Drawn::Numbers(v) => {
                columns.push(Column::numerical(&f.name, v.iter().map(|&x| Some(x)).collect()));
                numeric.insert(&f.name, v);
            }
            Drawn::Codes(codes) => {
                let Distribution::Categorical { categories, .. } = dist else {
                    unreachable!()
                };
                columns.push(Column {
                    name: f.name.clone(),
                    kind: ColumnKind::Categorical,
                    values: crate::data::ColumnValues::Labels(
                        codes.iter().map(|&c| Some(categories[c].clone())).collect(),
                    ),
                });
                numeric.insert(&f.name, codes.iter().map(|&c| c as f64).collect());
            }
        }
    }
    let mut r = rng::rng(rng::derive(side_seed, LABEL_STREAM));
    let labels = (0..n)
        .map(|i| {
            let mut z = spec.label.intercept;
            for (name, c) in &spec.label.coefficients {
                z += c * numeric[name.as_str()][i];
            }
            if side == SIDE_TRAIN {
                for (name, c) in &spec.label.train_only {
                    z += c * numeric[name.as_str()][i];
                }
            }
            u8::from(r.random::<f64>() < sigmoid(z))
        })
        .collect();
    Ok((Dataset::new("", columns, None)?, labels))
}

pub fn generate(spec: &DriftSpec) -> Result<SynthData> {
    spec.validate()?;
    let (train, train_labels) = side(spec, SIDE_TRAIN, spec.n_train)?;
    let (test, test_labels) = side(spec, SIDE_TEST, spec.n_test)?;
    let train = Dataset::new("train", train.columns().to_vec(), Some(train_labels))?;
    let test = Dataset::new("test", test.columns().to_vec(), None)?;
    Ok(SynthData {
        train,
        test,
        test_labels,
        ground_truth: spec.drifted(),
    })
}
