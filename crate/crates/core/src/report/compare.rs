use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::runner::{Interval, Report};
use crate::error::{Error, Result};

/// Row label for the adversarial AUC, which is shown but never ranked.
pub const ADVERSARIAL_ROW: &str = "adversarial_auc";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub value: Interval,
    /// Difference from the same row in the first column of this dataset.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    /// Highest outcome AUC in its column.
    pub winner: bool,
}

/// Rows are methods, columns are datasets. A dataset that appears in several
/// reports with overlapping methods gets one column per report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub columns: Vec<String>,
    pub rows: Vec<String>,
    /// `cells[row][column]`; `None` marks a missing cell.
    pub cells: Vec<Vec<Option<Cell>>>,
}

impl Comparison {
    pub fn cell(&self, row: &str, column: &str) -> Option<&Cell> {
        let r = self.rows.iter().position(|x| x == row)?;
        let c = self.columns.iter().position(|x| x == column)?;
        self.cells[r][c].as_ref()
    }

    pub fn to_text(&self) -> String {
        let width = self.rows.iter().map(String::len).max().unwrap_or(6).max(6);
        let mut s = format!("{:<width$}", "method");
        for c in &self.columns {
            let _ = write!(s, " | {c:^26}");
        }
        s.push('\n');
        for (r, name) in self.rows.iter().enumerate() {
            let _ = write!(s, "{name:<width$}");
            for cell in &self.cells[r] {
                let text = match cell {
                    None => "-".to_string(),
                    Some(c) => {
                        let mut t = c.value.to_string();
                        if let Some(d) = c.delta.filter(|d| *d != 0.0) {
                            let _ = write!(t, " ({d:+.4})");
                        }
                        if c.winner {
                            t.push_str(" *");
                        }
                        t
                    }
                };
                let _ = write!(s, " | {text:^26}");
            }
            s.push('\n');
        }
        s
    }
}

fn report_rows(r: &Report) -> Vec<(String, Interval)> {
    let mut rows = Vec::new();
    if let Some(a) = r.summary.adversarial_auc {
        rows.push((ADVERSARIAL_ROW.to_string(), a));
    }
    for o in &r.summary.outcomes {
        rows.push((o.adaptation.to_string(), o.auc));
    }
    rows
}

/// Aligns the reports' summaries into one table with winner flags.
pub fn compare(reports: &[Report]) -> Result<Comparison> {
    let first = reports.first().ok_or(Error::EmptyData("no reports to compare"))?;
    if let Some(r) = reports.iter().find(|r| r.version != first.version) {
        return Err(Error::Serde(format!(
            "report versions differ: {} vs {}",
            first.version, r.version
        )));
    }
    let mut rows: Vec<String> = Vec::new();
    // (column name, base dataset, row values)
    let mut columns: Vec<(String, String, Vec<(String, Interval)>)> = Vec::new();
    for r in reports {
        let values = report_rows(r);
        for (name, _) in &values {
            if !rows.contains(name) {
                rows.push(name.clone());
            }
        }
        let slot = columns
            .iter_mut()
            .find(|(_, base, existing)| *base == r.dataset && !existing.iter().any(|(n, _)| values.iter().any(|(m, _)| m == n)));
        match slot {
            Some((_, _, existing)) => existing.extend(values),
            None => {
                let same = columns.iter().filter(|(_, base, _)| *base == r.dataset).count();
                let name = if same == 0 {
                    r.dataset.clone()
                } else {
                    format!("{}#{}", r.dataset, same + 1)
                };
                columns.push((name, r.dataset.clone(), values));
            }
        }
    }
    let lookup = |values: &[(String, Interval)], row: &str| values.iter().find(|(n, _)| n == row).map(|(_, v)| *v);
    let mut cells = vec![vec![None; columns.len()]; rows.len()];
    for (c, (_, base, values)) in columns.iter().enumerate() {
        let reference = columns.iter().find(|(_, b, _)| b == base).map(|(_, _, v)| v).expect("own column");
        let best = values
            .iter()
            .filter(|(n, _)| n != ADVERSARIAL_ROW)
            .map(|(_, v)| v.mean)
            .fold(f64::NEG_INFINITY, f64::max);
        for (r, row) in rows.iter().enumerate() {
            if let Some(v) = lookup(values, row) {
                cells[r][c] = Some(Cell {
                    value: v,
                    delta: lookup(reference, row).map(|ref_v| v.mean - ref_v.mean),
                    winner: row != ADVERSARIAL_ROW && v.mean == best,
                });
            }
        }
    }
    Ok(Comparison {
        columns: columns.into_iter().map(|(n, _, _)| n).collect(),
        rows,
        cells,
    })
}
