use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Column, ColumnKind, ColumnValues, Dataset};
use crate::error::{Error, Result};

/// Cells spelled like this (after trimming, case-insensitive) are missing.
pub fn is_missing_token(cell: &str) -> bool {
    let t = cell.trim();
    t.is_empty() || t.eq_ignore_ascii_case("na") || t.eq_ignore_ascii_case("nan")
}

#[derive(Debug, Clone, PartialEq, Default)]
pub enum KindSource {
    /// All-parseable-as-number columns are numerical, everything else categorical.
    #[default]
    Infer,
    Explicit(BTreeMap<String, ColumnKind>),
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct LoadOptions {
    pub kinds: KindSource,
    /// Column holding the binary outcome; it is pulled out of the feature columns.
    pub label: Option<String>,
}

impl LoadOptions {
    pub fn infer() -> Self {
        Self::default()
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = Some(label.into());
        self
    }
}

/// On-disk schema file (TOML):
///
/// ```toml
/// label = "target"
///
/// [columns]
/// age = "numerical"
/// city = "categorical"
/// signup = "datetime"
/// ```
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Schema {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    pub columns: BTreeMap<String, ColumnKind>,
}

impl Schema {
    pub fn from_dataset(ds: &Dataset, label: Option<&str>) -> Self {
        Schema {
            label: label.map(str::to_owned),
            columns: ds.kinds().into_iter().collect(),
        }
    }

    pub fn from_toml_str(s: &str) -> Result<Self> {
        Ok(toml::from_str(s)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("schema serializes")
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_toml_string()).map_err(|e| Error::io(path, e))
    }

    pub fn load_options(&self) -> LoadOptions {
        LoadOptions {
            kinds: KindSource::Explicit(self.columns.clone()),
            label: self.label.clone(),
        }
    }
}

pub fn load_csv(path: impl AsRef<Path>, opts: &LoadOptions) -> Result<Dataset> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    read_csv(name, file, opts)
}

pub(crate) fn read_csv<R: std::io::Read>(
    name: String,
    reader: R,
    opts: &LoadOptions,
) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(|h| h.trim().to_owned()).collect();
    if header.is_empty() || header.iter().all(String::is_empty) {
        return Err(Error::SchemaMismatch("missing header row".into()));
    }

    let label_idx = match &opts.label {
        Some(l) => Some(
            header
                .iter()
                .position(|h| h == l)
                .ok_or_else(|| Error::SchemaMismatch(format!("label column `{l}` not in header")))?,
        ),
        None => None,
    };

    if let KindSource::Explicit(kinds) = &opts.kinds {
        let feature_names: Vec<&String> = header
            .iter()
            .enumerate()
            .filter(|(i, _)| Some(*i) != label_idx)
            .map(|(_, h)| h)
            .collect();
        let missing: Vec<&str> = feature_names
            .iter()
            .filter(|h| !kinds.contains_key(h.as_str()))
            .map(|h| h.as_str())
            .collect();
        let extra: Vec<&str> = kinds
            .keys()
            .filter(|k| !feature_names.iter().any(|h| h == k))
            .map(String::as_str)
            .collect();
        if !missing.is_empty() || !extra.is_empty() {
            return Err(Error::SchemaMismatch(format!(
                "not in schema: [{}]; not in header: [{}]",
                missing.join(", "),
                extra.join(", ")
            )));
        }
    }

    let mut raw: Vec<Vec<Option<String>>> = vec![Vec::new(); header.len()];
    let mut lines = Vec::new();
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != header.len() {
            return Err(Error::RaggedRow {
                line,
                expected: header.len(),
                found: record.len(),
            });
        }
        for (j, cell) in record.iter().enumerate() {
            raw[j].push(if is_missing_token(cell) {
                None
            } else {
                Some(cell.trim().to_owned())
            });
        }
        lines.push(line);
    }

    let mut label = None;
    let mut columns = Vec::with_capacity(header.len());
    for (j, (col_name, cells)) in header.iter().zip(raw).enumerate() {
        if Some(j) == label_idx {
            label = Some(parse_label(col_name, &cells)?);
            continue;
        }
        let kind = match &opts.kinds {
            KindSource::Explicit(kinds) => kinds[col_name],
            KindSource::Infer => infer_kind(&cells),
        };
        let values = if kind == ColumnKind::Numerical {
            let mut nums = Vec::with_capacity(cells.len());
            for (i, c) in cells.into_iter().enumerate() {
                nums.push(match c {
                    None => None,
                    Some(s) => Some(s.parse::<f64>().map_err(|_| Error::BadNumber {
                        line: lines[i],
                        column: col_name.clone(),
                        value: s.clone(),
                    })?),
                });
            }
            ColumnValues::Numbers(nums)
        } else {
            ColumnValues::Labels(cells)
        };
        columns.push(Column {
            name: col_name.clone(),
            kind,
            values,
        });
    }
    Dataset::new(name, columns, label)
}

fn infer_kind(cells: &[Option<String>]) -> ColumnKind {
    if cells.iter().flatten().all(|s| s.parse::<f64>().is_ok()) {
        ColumnKind::Numerical
    } else {
        ColumnKind::Categorical
    }
}

fn parse_label(column: &str, cells: &[Option<String>]) -> Result<Vec<u8>> {
    cells
        .iter()
        .enumerate()
        .map(|(row, c)| {
            let bad = || Error::NonBinaryLabel {
                column: column.to_owned(),
                row,
                value: c.clone().unwrap_or_else(|| "<missing>".into()),
            };
            let v: f64 = c.as_deref().ok_or_else(bad)?.parse().map_err(|_| bad())?;
            if v == 0.0 {
                Ok(0)
            } else if v == 1.0 {
                Ok(1)
            } else {
                Err(bad())
            }
        })
        .collect()
}

/// Writes the dataset as CSV; the label, when present and named, becomes the last column.
pub fn write_csv(ds: &Dataset, label_name: Option<&str>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(file);
    let with_label = label_name.filter(|_| ds.label().is_some());
    let mut header: Vec<&str> = ds.columns().iter().map(|c| c.name.as_str()).collect();
    if let Some(l) = with_label {
        header.push(l);
    }
    w.write_record(&header)?;
    let mut row = Vec::with_capacity(header.len());
    for i in 0..ds.n_rows() {
        row.clear();
        for c in ds.columns() {
            row.push(match &c.values {
                ColumnValues::Numbers(v) => v[i].map(|x| format!("{x:?}")).unwrap_or_default(),
                ColumnValues::Labels(v) => v[i].clone().unwrap_or_default(),
            });
        }
        if with_label.is_some() {
            row.push(ds.label().unwrap()[i].to_string());
        }
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn read(text: &str, opts: &LoadOptions) -> Result<Dataset> {
        read_csv("t".into(), text.as_bytes(), opts)
    }

    #[test]
    fn infers_numerical_and_categorical() {
        let ds = read("a,b\n1,x\n2,3\n3,y\n", &LoadOptions::infer()).unwrap();
        assert_eq!(
            ds.kinds(),
            vec![
                ("a".to_string(), ColumnKind::Numerical),
                ("b".to_string(), ColumnKind::Categorical)
            ]
        );
        assert_eq!(ds.n_rows(), 3);
    }

    #[test]
    fn empty_numeric_cell_is_missing_not_zero() {
        let ds = read("a,b\n1,x\n,y\n", &LoadOptions::infer()).unwrap();
        match &ds.column("a").unwrap().values {
            ColumnValues::Numbers(v) => assert_eq!(v, &vec![Some(1.0), None]),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn missing_spellings() {
        for tok in ["", "NA", "na", "NaN", "nan", " NA "] {
            assert!(is_missing_token(tok), "{tok:?}");
        }
        assert!(!is_missing_token("0"));
        assert!(!is_missing_token("N/A"));
    }

    #[test]
    fn ragged_row_names_line() {
        let err = read("a,b\n1,2\n1,2,3\n", &LoadOptions::infer()).unwrap_err();
        match err {
            Error::RaggedRow {
                line,
                expected,
                found,
            } => {
                assert_eq!((line, expected, found), (3, 2, 3));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn explicit_schema_mismatch() {
        let schema = Schema::from_toml_str("[columns]\na = \"numerical\"\nc = \"categorical\"\n")
            .unwrap();
        let err = read("a,b\n1,2\n", &schema.load_options()).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains('b') && msg.contains('c'), "{msg}");
    }

    #[test]
    fn explicit_schema_keeps_excluded_kinds() {
        let schema = Schema::from_toml_str(
            "label = \"y\"\n[columns]\na = \"categorical\"\nt = \"datetime\"\n",
        )
        .unwrap();
        let ds = read("a,t,y\n1,2020-01-01,0\n2,2020-01-02,1\n", &schema.load_options()).unwrap();
        assert_eq!(ds.column("a").unwrap().kind, ColumnKind::Categorical);
        assert_eq!(ds.column("t").unwrap().kind, ColumnKind::Datetime);
        assert_eq!(ds.label(), Some(&[0u8, 1][..]));
        assert!(ds.column("y").is_none());
    }

    #[test]
    fn non_binary_label_errors() {
        let opts = LoadOptions::infer().with_label("y");
        assert!(matches!(
            read("a,y\n1,0\n2,2\n", &opts),
            Err(Error::NonBinaryLabel { row: 1, .. })
        ));
    }

    #[test]
    fn write_then_load_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        let ds = read("a,b,y\n1.5,x,1\n,\"q,r\",0\n", &LoadOptions::infer().with_label("y")).unwrap();
        write_csv(&ds, Some("y"), &path).unwrap();
        let schema = Schema::from_dataset(&ds, Some("y"));
        let back = load_csv(&path, &schema.load_options()).unwrap();
        assert_eq!(back.columns(), ds.columns());
        assert_eq!(back.label(), ds.label());
    }
}
