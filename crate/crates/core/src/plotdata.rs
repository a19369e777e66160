//! Tooling-neutral plot data: named numeric columns written as CSV.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlotKind {
    Roc,
    CvCurve,
    /// One column per group; every column is one box.
    Boxplot,
    NullHistogram,
}

impl PlotKind {
    fn required(self) -> &'static [&'static str] {
        match self {
            PlotKind::Roc => &["fpr", "tpr"],
            PlotKind::CvCurve => &["n_lv", "metric"],
            PlotKind::Boxplot => &[],
            PlotKind::NullHistogram => &["null"],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlotData {
    pub kind: PlotKind,
    pub columns: Vec<(String, Vec<f64>)>,
}

impl PlotData {
    pub fn new(kind: PlotKind, columns: Vec<(String, Vec<f64>)>) -> Result<Self> {
        if columns.is_empty() {
            return Err(Error::invalid("plot data needs at least one column"));
        }
        for name in kind.required() {
            if !columns.iter().any(|(c, _)| c == name) {
                return Err(Error::invalid(format!("{kind:?} plot data needs a `{name}` column")));
            }
        }
        let len = columns[0].1.len();
        if let Some((c, v)) = columns.iter().find(|(_, v)| v.len() != len) {
            return Err(Error::shape(format!(
                "column `{c}` has {} values, expected {len}",
                v.len()
            )));
        }
        Ok(Self { kind, columns })
    }

    pub fn column(&self, name: &str) -> Option<&[f64]> {
        self.columns.iter().find(|(c, _)| c == name).map(|(_, v)| v.as_slice())
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let io = |e: std::io::Error| Error::Io {
            path: path.to_path_buf(),
            source: e,
        };
        let mut w = csv::Writer::from_path(path).map_err(|e| Error::Data(e.to_string()))?;
        let csv_err = |e: csv::Error| Error::Data(e.to_string());
        w.write_record(self.columns.iter().map(|(c, _)| c.as_str())).map_err(csv_err)?;
        for i in 0..self.columns[0].1.len() {
            w.write_record(self.columns.iter().map(|(_, v)| v[i].to_string()))
                .map_err(csv_err)?;
        }
        w.flush().map_err(io)
    }
}
