//! Tabular data: typed columns with explicit missingness, CSV ingestion, and
//! the numeric encoding consumed by the tree learners.
//!
//! Only numerical and categorical columns are modelable. Date-time and
//! multi-value categorical columns are carried through ingestion but dropped
//! (and reported) by [`encode`].

mod encode;
mod io;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use encode::{
    align_codebooks, encode, CategoryLabel, Codebook, EncodedMatrix, EncodingPolicy, NumericMissing,
};
pub use io::{is_missing_token, load_csv, write_csv, KindSource, LoadOptions, Schema};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColumnKind {
    Numerical,
    Categorical,
    Datetime,
    MultivalueCategorical,
}

impl ColumnKind {
    pub fn is_modelable(self) -> bool {
        matches!(self, ColumnKind::Numerical | ColumnKind::Categorical)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ColumnValues {
    Numbers(Vec<Option<f64>>),
    Labels(Vec<Option<String>>),
}

impl ColumnValues {
    pub fn len(&self) -> usize {
        match self {
            ColumnValues::Numbers(v) => v.len(),
            ColumnValues::Labels(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_missing(&self, row: usize) -> bool {
        match self {
            ColumnValues::Numbers(v) => v[row].is_none(),
            ColumnValues::Labels(v) => v[row].is_none(),
        }
    }

    fn select(&self, rows: &[usize]) -> ColumnValues {
        match self {
            ColumnValues::Numbers(v) => ColumnValues::Numbers(rows.iter().map(|&r| v[r]).collect()),
            ColumnValues::Labels(v) => {
                ColumnValues::Labels(rows.iter().map(|&r| v[r].clone()).collect())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Column {
    pub name: String,
    pub kind: ColumnKind,
    pub values: ColumnValues,
}

impl Column {
    pub fn numerical(name: impl Into<String>, values: Vec<Option<f64>>) -> Self {
        Column {
            name: name.into(),
            kind: ColumnKind::Numerical,
            values: ColumnValues::Numbers(values),
        }
    }

    pub fn categorical<S: Into<String>>(name: impl Into<String>, values: Vec<Option<S>>) -> Self {
        Column {
            name: name.into(),
            kind: ColumnKind::Categorical,
            values: ColumnValues::Labels(values.into_iter().map(|v| v.map(Into::into)).collect()),
        }
    }

    /// A column that is kept on the dataset but never encoded.
    pub fn excluded<S: Into<String>>(
        name: impl Into<String>,
        kind: ColumnKind,
        values: Vec<Option<S>>,
    ) -> Self {
        Column {
            name: name.into(),
            kind,
            values: ColumnValues::Labels(values.into_iter().map(|v| v.map(Into::into)).collect()),
        }
    }
}

/// A table of `n` rows by `d` typed columns plus an optional binary outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    name: String,
    columns: Vec<Column>,
    label: Option<Vec<u8>>,
    n_rows: usize,
}

impl Dataset {
    pub fn new(
        name: impl Into<String>,
        columns: Vec<Column>,
        label: Option<Vec<u8>>,
    ) -> Result<Self> {
        let n_rows = match (columns.first(), &label) {
            (Some(c), _) => c.values.len(),
            (None, Some(l)) => l.len(),
            (None, None) => 0,
        };
        for c in &columns {
            if c.values.len() != n_rows {
                return Err(Error::LengthMismatch(format!(
                    "column `{}` has {} rows, expected {n_rows}",
                    c.name,
                    c.values.len()
                )));
            }
            let consistent = match (&c.values, c.kind) {
                (ColumnValues::Numbers(_), ColumnKind::Numerical) => true,
                (ColumnValues::Labels(_), ColumnKind::Numerical) => false,
                (ColumnValues::Numbers(_), _) => false,
                (ColumnValues::Labels(_), _) => true,
            };
            if !consistent {
                return Err(Error::InvalidParameter(format!(
                    "column `{}` storage does not match kind {:?}",
                    c.name, c.kind
                )));
            }
        }
        for (i, a) in columns.iter().enumerate() {
            if columns[..i].iter().any(|b| b.name == a.name) {
                return Err(Error::InvalidParameter(format!("duplicate column `{}`", a.name)));
            }
        }
        if let Some(l) = &label {
            if l.len() != n_rows {
                return Err(Error::LengthMismatch(format!(
                    "label has {} rows, expected {n_rows}",
                    l.len()
                )));
            }
            if let Some(row) = l.iter().position(|&v| v > 1) {
                return Err(Error::NonBinaryLabel {
                    column: "label".into(),
                    row,
                    value: l[row].to_string(),
                });
            }
        }
        Ok(Dataset {
            name: name.into(),
            columns,
            label,
            n_rows,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_columns(&self) -> usize {
        self.columns.len()
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn column(&self, name: &str) -> Option<&Column> {
        self.columns.iter().find(|c| c.name == name)
    }

    pub fn kinds(&self) -> Vec<(String, ColumnKind)> {
        self.columns.iter().map(|c| (c.name.clone(), c.kind)).collect()
    }

    pub fn label(&self) -> Option<&[u8]> {
        self.label.as_deref()
    }

    /// Splits the outcome off, leaving an unlabeled copy.
    pub fn take_label(mut self) -> (Dataset, Option<Vec<u8>>) {
        let label = self.label.take();
        (self, label)
    }

    pub fn with_label(mut self, label: Vec<u8>) -> Result<Self> {
        self.label = None;
        let Dataset { name, columns, .. } = self;
        Dataset::new(name, columns, Some(label))
    }

    pub fn select_rows(&self, rows: &[usize]) -> Dataset {
        Dataset {
            name: self.name.clone(),
            columns: self
                .columns
                .iter()
                .map(|c| Column {
                    name: c.name.clone(),
                    kind: c.kind,
                    values: c.values.select(rows),
                })
                .collect(),
            label: self
                .label
                .as_ref()
                .map(|l| rows.iter().map(|&r| l[r]).collect()),
            n_rows: rows.len(),
        }
    }

    /// Row-concatenates datasets with identical column layouts.
    pub fn concat(name: impl Into<String>, parts: &[Dataset]) -> Result<Dataset> {
        let first = parts.first().ok_or(Error::EmptyData("no datasets to concatenate"))?;
        for p in &parts[1..] {
            if p.kinds() != first.kinds() {
                return Err(Error::ColumnMismatch(format!(
                    "`{}` and `{}` have different columns",
                    first.name, p.name
                )));
            }
        }
        let columns = first
            .columns
            .iter()
            .enumerate()
            .map(|(j, c)| {
                let values = match &c.values {
                    ColumnValues::Numbers(_) => ColumnValues::Numbers(
                        parts
                            .iter()
                            .flat_map(|p| match &p.columns[j].values {
                                ColumnValues::Numbers(v) => v.clone(),
                                ColumnValues::Labels(_) => unreachable!(),
                            })
                            .collect(),
                    ),
                    ColumnValues::Labels(_) => ColumnValues::Labels(
                        parts
                            .iter()
                            .flat_map(|p| match &p.columns[j].values {
                                ColumnValues::Labels(v) => v.clone(),
                                ColumnValues::Numbers(_) => unreachable!(),
                            })
                            .collect(),
                    ),
                };
                Column {
                    name: c.name.clone(),
                    kind: c.kind,
                    values,
                }
            })
            .collect();
        let label = if parts.iter().all(|p| p.label.is_some()) {
            Some(parts.iter().flat_map(|p| p.label.clone().unwrap()).collect())
        } else {
            None
        };
        Dataset::new(name, columns, label)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_ragged_columns() {
        let cols = vec![
            Column::numerical("a", vec![Some(1.0), Some(2.0)]),
            Column::numerical("b", vec![Some(1.0)]),
        ];
        assert!(matches!(Dataset::new("t", cols, None), Err(Error::LengthMismatch(_))));
    }

    #[test]
    fn rejects_non_binary_label() {
        let cols = vec![Column::numerical("a", vec![Some(1.0), Some(2.0)])];
        let err = Dataset::new("t", cols, Some(vec![0, 2])).unwrap_err();
        assert!(matches!(err, Error::NonBinaryLabel { row: 1, .. }));
    }

    #[test]
    fn concat_stacks_rows_and_labels() {
        let a = Dataset::new(
            "a",
            vec![Column::categorical("c", vec![Some("x"), None])],
            Some(vec![0, 1]),
        )
        .unwrap();
        let b = Dataset::new("b", vec![Column::categorical("c", vec![Some("y")])], Some(vec![1]))
            .unwrap();
        let ab = Dataset::concat("ab", &[a, b]).unwrap();
        assert_eq!(ab.n_rows(), 3);
        assert_eq!(ab.label(), Some(&[0u8, 1, 1][..]));
    }
}
