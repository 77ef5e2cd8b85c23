use std::borrow::Cow;
use std::collections::HashMap;

use super::{ColumnKind, ColumnValues, Dataset};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NumericMissing {
    /// Missing numeric cells become 0.0 (learners without missing routing).
    #[default]
    ImputeZero,
    /// Missing numeric cells are masked and left for the learner to route.
    KeepMissing,
}

/// Categorical missing values always get their own label, and codes are
/// assigned in order of first appearance; only numeric handling varies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct EncodingPolicy {
    pub numeric_missing: NumericMissing,
}

impl EncodingPolicy {
    pub const IMPUTE_ZERO: EncodingPolicy = EncodingPolicy {
        numeric_missing: NumericMissing::ImputeZero,
    };
    pub const KEEP_MISSING: EncodingPolicy = EncodingPolicy {
        numeric_missing: NumericMissing::KeepMissing,
    };
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum CategoryLabel {
    Value(String),
    Missing,
}

/// Label → dense integer code for one categorical column.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Codebook {
    labels: Vec<CategoryLabel>,
    index: HashMap<CategoryLabel, u32>,
}

impl Codebook {
    fn code_or_insert(&mut self, label: CategoryLabel) -> u32 {
        if let Some(&c) = self.index.get(&label) {
            return c;
        }
        let c = self.labels.len() as u32;
        self.index.insert(label.clone(), c);
        self.labels.push(label);
        c
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn code(&self, label: &CategoryLabel) -> Option<u32> {
        self.index.get(label).copied()
    }

    pub fn decode(&self, code: u32) -> Option<&CategoryLabel> {
        self.labels.get(code as usize)
    }

    pub fn labels(&self) -> &[CategoryLabel] {
        &self.labels
    }

    /// Code given to test categories never seen in training.
    pub fn unseen_code(&self) -> u32 {
        self.labels.len() as u32
    }

    /// Code for a missing test cell. Reuses the training missing label when it
    /// exists, otherwise takes the slot after the unseen code.
    pub fn missing_code(&self) -> u32 {
        self.code(&CategoryLabel::Missing)
            .unwrap_or(self.labels.len() as u32 + 1)
    }

    fn lookup(&self, cell: Option<&String>) -> u32 {
        match cell {
            None => self.missing_code(),
            Some(s) => self
                .index
                .get(&CategoryLabel::Value(s.clone()))
                .copied()
                .unwrap_or_else(|| self.unseen_code()),
        }
    }
}

/// Column-major numeric matrix with a per-cell missing mask.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedMatrix {
    n_rows: usize,
    feature_names: Vec<String>,
    kinds: Vec<ColumnKind>,
    columns: Vec<Vec<f64>>,
    missing: Vec<Vec<bool>>,
    codebooks: Vec<Option<Codebook>>,
    dropped: Vec<(String, ColumnKind)>,
    policy: EncodingPolicy,
}

impl EncodedMatrix {
    /// Builds an all-numerical matrix without missing cells.
    pub fn from_columns(names: Vec<String>, columns: Vec<Vec<f64>>) -> Result<Self> {
        let n_rows = columns.first().map_or(0, Vec::len);
        if names.len() != columns.len() {
            return Err(Error::LengthMismatch(format!(
                "{} names for {} columns",
                names.len(),
                columns.len()
            )));
        }
        if columns.iter().any(|c| c.len() != n_rows) {
            return Err(Error::LengthMismatch("columns differ in length".into()));
        }
        let d = names.len();
        Ok(EncodedMatrix {
            n_rows,
            feature_names: names,
            kinds: vec![ColumnKind::Numerical; d],
            missing: columns.iter().map(|c| vec![false; c.len()]).collect(),
            columns,
            codebooks: vec![None; d],
            dropped: Vec::new(),
            policy: EncodingPolicy::IMPUTE_ZERO,
        })
    }

    /// Builds an all-numerical matrix from rows; `NaN` cells are masked.
    pub fn from_rows(names: Vec<String>, rows: &[Vec<f64>]) -> Result<Self> {
        let d = names.len();
        if rows.iter().any(|r| r.len() != d) {
            return Err(Error::LengthMismatch("row width differs from names".into()));
        }
        let columns: Vec<Vec<f64>> = (0..d).map(|j| rows.iter().map(|r| r[j]).collect()).collect();
        let mut m = Self::from_columns(names, columns)?;
        if m.columns.iter().flatten().any(|v| v.is_nan()) {
            m.missing = m
                .columns
                .iter()
                .map(|c| c.iter().map(|v| v.is_nan()).collect())
                .collect();
            m.policy = EncodingPolicy::KEEP_MISSING;
        }
        Ok(m)
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn feature_index(&self, name: &str) -> Option<usize> {
        self.feature_names.iter().position(|n| n == name)
    }

    pub fn kinds(&self) -> &[ColumnKind] {
        &self.kinds
    }

    pub fn column(&self, j: usize) -> &[f64] {
        &self.columns[j]
    }

    pub fn missing_column(&self, j: usize) -> &[bool] {
        &self.missing[j]
    }

    pub fn value(&self, row: usize, j: usize) -> f64 {
        self.columns[j][row]
    }

    pub fn is_missing(&self, row: usize, j: usize) -> bool {
        self.missing[j][row]
    }

    pub fn codebook(&self, j: usize) -> Option<&Codebook> {
        self.codebooks[j].as_ref()
    }

    /// Columns that were present on the dataset but excluded from modeling.
    pub fn dropped(&self) -> &[(String, ColumnKind)] {
        &self.dropped
    }

    pub fn policy(&self) -> EncodingPolicy {
        self.policy
    }

    pub fn has_missing(&self) -> bool {
        self.missing.iter().flatten().any(|&m| m)
    }

    /// Replaces masked cells with 0.0; borrows when nothing is masked.
    pub fn impute_zero(&self) -> Cow<'_, EncodedMatrix> {
        if !self.has_missing() {
            return Cow::Borrowed(self);
        }
        let mut m = self.clone();
        for (col, mask) in m.columns.iter_mut().zip(m.missing.iter_mut()) {
            for (v, miss) in col.iter_mut().zip(mask.iter_mut()) {
                if *miss {
                    *v = 0.0;
                    *miss = false;
                }
            }
        }
        m.policy = EncodingPolicy::IMPUTE_ZERO;
        Cow::Owned(m)
    }

    pub fn select_rows(&self, rows: &[usize]) -> EncodedMatrix {
        EncodedMatrix {
            n_rows: rows.len(),
            feature_names: self.feature_names.clone(),
            kinds: self.kinds.clone(),
            columns: self
                .columns
                .iter()
                .map(|c| rows.iter().map(|&r| c[r]).collect())
                .collect(),
            missing: self
                .missing
                .iter()
                .map(|c| rows.iter().map(|&r| c[r]).collect())
                .collect(),
            codebooks: self.codebooks.clone(),
            dropped: self.dropped.clone(),
            policy: self.policy,
        }
    }

    /// Keeps the named features, in the order given.
    pub fn select_features<S: AsRef<str>>(&self, names: &[S]) -> Result<EncodedMatrix> {
        let idx: Vec<usize> = names
            .iter()
            .map(|n| {
                self.feature_index(n.as_ref())
                    .ok_or_else(|| Error::FeatureMismatch(format!("unknown feature `{}`", n.as_ref())))
            })
            .collect::<Result<_>>()?;
        Ok(EncodedMatrix {
            n_rows: self.n_rows,
            feature_names: idx.iter().map(|&j| self.feature_names[j].clone()).collect(),
            kinds: idx.iter().map(|&j| self.kinds[j]).collect(),
            columns: idx.iter().map(|&j| self.columns[j].clone()).collect(),
            missing: idx.iter().map(|&j| self.missing[j].clone()).collect(),
            codebooks: idx.iter().map(|&j| self.codebooks[j].clone()).collect(),
            dropped: self.dropped.clone(),
            policy: self.policy,
        })
    }

    /// Appends a numerical column without missing cells.
    pub fn with_column(&self, name: impl Into<String>, values: Vec<f64>) -> Result<EncodedMatrix> {
        let name = name.into();
        if values.len() != self.n_rows {
            return Err(Error::LengthMismatch(format!("column `{name}` length")));
        }
        if self.feature_index(&name).is_some() {
            return Err(Error::InvalidParameter(format!("duplicate feature `{name}`")));
        }
        let mut m = self.clone();
        m.feature_names.push(name);
        m.kinds.push(ColumnKind::Numerical);
        m.missing.push(vec![false; values.len()]);
        m.columns.push(values);
        m.codebooks.push(None);
        Ok(m)
    }

    /// Row-stacks two matrices with the same feature list. Codebooks come from `self`.
    pub fn vstack(&self, other: &EncodedMatrix) -> Result<EncodedMatrix> {
        if self.feature_names != other.feature_names {
            return Err(Error::FeatureMismatch(
                "cannot stack matrices with different features".into(),
            ));
        }
        let cat = |a: &Vec<f64>, b: &Vec<f64>| a.iter().chain(b).copied().collect::<Vec<_>>();
        Ok(EncodedMatrix {
            n_rows: self.n_rows + other.n_rows,
            feature_names: self.feature_names.clone(),
            kinds: self.kinds.clone(),
            columns: self.columns.iter().zip(&other.columns).map(|(a, b)| cat(a, b)).collect(),
            missing: self
                .missing
                .iter()
                .zip(&other.missing)
                .map(|(a, b)| a.iter().chain(b).copied().collect())
                .collect(),
            codebooks: self.codebooks.clone(),
            dropped: self.dropped.clone(),
            policy: self.policy,
        })
    }
}

/// Label-encodes categoricals (first-appearance order, missing as its own
/// label) and applies the policy's numeric missing handling.
pub fn encode(ds: &Dataset, policy: EncodingPolicy) -> Result<EncodedMatrix> {
    let mut m = EncodedMatrix {
        n_rows: ds.n_rows(),
        feature_names: Vec::new(),
        kinds: Vec::new(),
        columns: Vec::new(),
        missing: Vec::new(),
        codebooks: Vec::new(),
        dropped: Vec::new(),
        policy,
    };
    for col in ds.columns() {
        if !col.kind.is_modelable() {
            m.dropped.push((col.name.clone(), col.kind));
            continue;
        }
        let (values, mask, codebook) = match &col.values {
            ColumnValues::Numbers(v) => {
                let (vals, mask) = encode_numbers(v, policy);
                (vals, mask, None)
            }
            ColumnValues::Labels(v) => {
                let mut cb = Codebook::default();
                let vals = v
                    .iter()
                    .map(|c| {
                        let label = match c {
                            Some(s) => CategoryLabel::Value(s.clone()),
                            None => CategoryLabel::Missing,
                        };
                        f64::from(cb.code_or_insert(label))
                    })
                    .collect();
                (vals, vec![false; v.len()], Some(cb))
            }
        };
        m.feature_names.push(col.name.clone());
        m.kinds.push(col.kind);
        m.columns.push(values);
        m.missing.push(mask);
        m.codebooks.push(codebook);
    }
    if m.feature_names.is_empty() {
        return Err(Error::NoModelableColumns);
    }
    Ok(m)
}

fn encode_numbers(v: &[Option<f64>], policy: EncodingPolicy) -> (Vec<f64>, Vec<bool>) {
    match policy.numeric_missing {
        NumericMissing::ImputeZero => (v.iter().map(|x| x.unwrap_or(0.0)).collect(), vec![false; v.len()]),
        NumericMissing::KeepMissing => (
            v.iter().map(|x| x.unwrap_or(f64::NAN)).collect(),
            v.iter().map(Option::is_none).collect(),
        ),
    }
}

/// Encodes `test` with the codebooks learned on the training matrix.
pub fn align_codebooks(
    train: &EncodedMatrix,
    test: &Dataset,
    policy: EncodingPolicy,
) -> Result<EncodedMatrix> {
    let expected: Vec<(&str, ColumnKind)> = train
        .feature_names
        .iter()
        .map(String::as_str)
        .zip(train.kinds.iter().copied())
        .chain(train.dropped.iter().map(|(n, k)| (n.as_str(), *k)))
        .collect();
    let unknown: Vec<&str> = test
        .columns()
        .iter()
        .filter(|c| !expected.contains(&(c.name.as_str(), c.kind)))
        .map(|c| c.name.as_str())
        .collect();
    let absent: Vec<&str> = expected
        .iter()
        .filter(|(n, k)| !test.columns().iter().any(|c| c.name == *n && c.kind == *k))
        .map(|(n, _)| *n)
        .collect();
    if !unknown.is_empty() || !absent.is_empty() {
        return Err(Error::ColumnMismatch(format!(
            "test-only or retyped columns: [{}]; train columns absent from test: [{}]",
            unknown.join(", "),
            absent.join(", ")
        )));
    }

    let mut m = EncodedMatrix {
        n_rows: test.n_rows(),
        feature_names: train.feature_names.clone(),
        kinds: train.kinds.clone(),
        columns: Vec::with_capacity(train.n_features()),
        missing: Vec::with_capacity(train.n_features()),
        codebooks: train.codebooks.clone(),
        dropped: train.dropped.clone(),
        policy,
    };
    for (j, name) in train.feature_names.iter().enumerate() {
        let col = test.column(name).expect("checked above");
        let (values, mask) = match (&col.values, &train.codebooks[j]) {
            (ColumnValues::Numbers(v), _) => encode_numbers(v, policy),
            (ColumnValues::Labels(v), Some(cb)) => (
                v.iter().map(|c| f64::from(cb.lookup(c.as_ref()))).collect(),
                vec![false; v.len()],
            ),
            (ColumnValues::Labels(_), None) => {
                return Err(Error::ColumnMismatch(format!("`{name}` has no codebook")))
            }
        };
        m.columns.push(values);
        m.missing.push(mask);
    }
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Column;
    use proptest::prelude::*;

    fn cat_ds(values: Vec<Option<&str>>) -> Dataset {
        Dataset::new("t", vec![Column::categorical("c", values)], None).unwrap()
    }

    #[test]
    fn categorical_codes_first_appearance_with_missing_label() {
        let ds = cat_ds(vec![Some("a"), Some("b"), None, Some("a")]);
        let m = encode(&ds, EncodingPolicy::IMPUTE_ZERO).unwrap();
        assert_eq!(m.column(0), &[0.0, 1.0, 2.0, 0.0]);
        assert_eq!(m.codebook(0).unwrap().decode(2), Some(&CategoryLabel::Missing));
        assert!(!m.has_missing());
    }

    #[test]
    fn numeric_missing_policies() {
        let ds = Dataset::new("t", vec![Column::numerical("x", vec![Some(1.5), None])], None).unwrap();
        let z = encode(&ds, EncodingPolicy::IMPUTE_ZERO).unwrap();
        assert_eq!(z.column(0), &[1.5, 0.0]);
        assert_eq!(z.missing_column(0), &[false, false]);
        let k = encode(&ds, EncodingPolicy::KEEP_MISSING).unwrap();
        assert_eq!(k.value(0, 0), 1.5);
        assert_eq!(k.missing_column(0), &[false, true]);
        assert_eq!(k.impute_zero().column(0), &[1.5, 0.0]);
    }

    #[test]
    fn excluded_kinds_are_dropped_and_reported() {
        let ds = Dataset::new(
            "t",
            vec![
                Column::numerical("x", vec![Some(1.0)]),
                Column::excluded("when", ColumnKind::Datetime, vec![Some("2020")]),
                Column::excluded("tags", ColumnKind::MultivalueCategorical, vec![Some("a b")]),
            ],
            None,
        )
        .unwrap();
        let m = encode(&ds, EncodingPolicy::IMPUTE_ZERO).unwrap();
        assert_eq!(m.feature_names(), &["x".to_string()]);
        assert_eq!(m.dropped().len(), 2);
    }

    #[test]
    fn nothing_modelable_is_an_error() {
        let ds = Dataset::new(
            "t",
            vec![Column::excluded("when", ColumnKind::Datetime, vec![Some("2020")])],
            None,
        )
        .unwrap();
        assert!(matches!(encode(&ds, EncodingPolicy::IMPUTE_ZERO), Err(Error::NoModelableColumns)));
    }

    #[test]
    fn unseen_test_category_gets_own_code() {
        let train = encode(&cat_ds(vec![Some("a"), Some("b")]), EncodingPolicy::IMPUTE_ZERO).unwrap();
        let test = cat_ds(vec![Some("c"), Some("a"), None]);
        let m = align_codebooks(&train, &test, EncodingPolicy::IMPUTE_ZERO).unwrap();
        // unseen = 2, missing never seen in training = 3
        assert_eq!(m.column(0), &[2.0, 0.0, 3.0]);
        let again = align_codebooks(&train, &test, EncodingPolicy::IMPUTE_ZERO).unwrap();
        assert_eq!(m, again);
    }

    #[test]
    fn test_missing_reuses_train_missing_code() {
        let train = encode(&cat_ds(vec![None, Some("b")]), EncodingPolicy::IMPUTE_ZERO).unwrap();
        let m = align_codebooks(&train, &cat_ds(vec![None, Some("z")]), EncodingPolicy::IMPUTE_ZERO)
            .unwrap();
        assert_eq!(m.column(0), &[0.0, 2.0]);
    }

    #[test]
    fn test_only_column_is_listed() {
        let train = encode(&cat_ds(vec![Some("a")]), EncodingPolicy::IMPUTE_ZERO).unwrap();
        let test = Dataset::new(
            "t",
            vec![
                Column::categorical("c", vec![Some("a")]),
                Column::numerical("extra", vec![Some(1.0)]),
            ],
            None,
        )
        .unwrap();
        let err = align_codebooks(&train, &test, EncodingPolicy::IMPUTE_ZERO).unwrap_err();
        assert!(matches!(&err, Error::ColumnMismatch(m) if m.contains("extra")), "{err}");
    }

    proptest! {
        #[test]
        fn codebook_decodes_back_to_labels(cells in proptest::collection::vec(proptest::option::of("[a-d]"), 1..40)) {
            let ds = Dataset::new("t", vec![Column::categorical("c", cells.clone())], None).unwrap();
            let m = encode(&ds, EncodingPolicy::KEEP_MISSING).unwrap();
            let cb = m.codebook(0).unwrap();
            for (i, cell) in cells.iter().enumerate() {
                let code = m.value(i, 0);
                prop_assert_eq!(code.fract(), 0.0);
                prop_assert!((code as usize) < cb.len());
                let expect = match cell {
                    Some(s) => CategoryLabel::Value(s.clone()),
                    None => CategoryLabel::Missing,
                };
                prop_assert_eq!(cb.decode(code as u32), Some(&expect));
            }
            prop_assert_eq!(encode(&ds, EncodingPolicy::KEEP_MISSING).unwrap(), m);
        }
    }
}
