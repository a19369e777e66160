use std::fs::File;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Observations × variables block with optional response and row annotations.
///
/// Immutable once built; subsets are copies.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    x: Matrix,
    y: Option<Matrix>,
    groups: Option<Vec<String>>,
    timestamps: Option<Vec<f64>>,
    variable_names: Option<Vec<String>>,
}

impl Dataset {
    pub fn new(x: Matrix) -> Self {
        Self {
            x,
            y: None,
            groups: None,
            timestamps: None,
            variable_names: None,
        }
    }

    pub fn with_y(mut self, y: Matrix) -> Result<Self> {
        if y.rows() != self.x.rows() {
            return Err(Error::shape(format!(
                "Y has {} rows but X has {}",
                y.rows(),
                self.x.rows()
            )));
        }
        self.y = Some(y);
        Ok(self)
    }

    pub fn with_groups(mut self, groups: Vec<String>) -> Result<Self> {
        self.check_len("group labels", groups.len())?;
        self.groups = Some(groups);
        Ok(self)
    }

    pub fn with_timestamps(mut self, timestamps: Vec<f64>) -> Result<Self> {
        self.check_len("timestamps", timestamps.len())?;
        if timestamps.iter().any(|t| !t.is_finite()) {
            return Err(Error::invalid("timestamps must be finite"));
        }
        self.timestamps = Some(timestamps);
        Ok(self)
    }

    pub fn with_variable_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.x.cols() {
            return Err(Error::shape(format!(
                "{} variable names for {} columns",
                names.len(),
                self.x.cols()
            )));
        }
        self.variable_names = Some(names);
        Ok(self)
    }

    fn check_len(&self, what: &str, len: usize) -> Result<()> {
        if len != self.x.rows() {
            return Err(Error::shape(format!(
                "{len} {what} for {} rows",
                self.x.rows()
            )));
        }
        Ok(())
    }

    pub fn x(&self) -> &Matrix {
        &self.x
    }

    pub fn y(&self) -> Option<&Matrix> {
        self.y.as_ref()
    }

    /// The response block, or an error naming the caller's need for it.
    pub fn require_y(&self) -> Result<&Matrix> {
        self.y
            .as_ref()
            .ok_or_else(|| Error::invalid("operation needs a response block Y"))
    }

    pub fn groups(&self) -> Option<&[String]> {
        self.groups.as_deref()
    }

    pub fn timestamps(&self) -> Option<&[f64]> {
        self.timestamps.as_deref()
    }

    pub fn variable_names(&self) -> Option<&[String]> {
        self.variable_names.as_deref()
    }

    pub fn n_rows(&self) -> usize {
        self.x.rows()
    }

    pub fn n_vars(&self) -> usize {
        self.x.cols()
    }

    /// Copy of the given rows (in order) with every annotation carried along.
    pub fn subset(&self, rows: &[usize]) -> Result<Dataset> {
        let pick_str = |v: &Vec<String>| rows.iter().map(|&i| v[i].clone()).collect();
        Ok(Dataset {
            x: self.x.gather_rows(rows)?,
            y: self.y.as_ref().map(|y| y.gather_rows(rows)).transpose()?,
            groups: self.groups.as_ref().map(pick_str),
            timestamps: self
                .timestamps
                .as_ref()
                .map(|t| rows.iter().map(|&i| t[i]).collect()),
            variable_names: self.variable_names.clone(),
        })
    }

    /// Copy restricted to the given X columns.
    pub fn select_variables(&self, cols: &[usize]) -> Result<Dataset> {
        let mut out = self.clone();
        out.x = self.x.select_columns(cols)?;
        out.variable_names = self
            .variable_names
            .as_ref()
            .map(|n| cols.iter().map(|&j| n[j].clone()).collect());
        Ok(out)
    }

    pub(crate) fn replace_x(&self, x: Matrix) -> Result<Dataset> {
        if x.shape() != self.x.shape() {
            return Err(Error::shape("replacement X must keep the shape"));
        }
        let mut out = self.clone();
        out.x = x;
        Ok(out)
    }

    pub(crate) fn replace_y(&self, y: Matrix) -> Result<Dataset> {
        let mut out = self.clone();
        out.y = None;
        out.with_y(y)
    }
}

/// Column reference in a CSV file: a 0-based index (negative counts from
/// the end, `-1` is the last column) or a header name.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ColumnRef {
    Index(i64),
    Name(String),
}

impl ColumnRef {
    fn resolve(&self, header: Option<&[String]>, width: usize) -> Result<usize> {
        match self {
            ColumnRef::Index(i) => {
                let idx = if *i < 0 { width as i64 + i } else { *i };
                if idx < 0 || idx as usize >= width {
                    return Err(Error::Data(format!(
                        "column {i} does not exist ({width} columns)"
                    )));
                }
                Ok(idx as usize)
            }
            ColumnRef::Name(name) => header
                .and_then(|h| h.iter().position(|c| c.trim() == name))
                .ok_or_else(|| Error::Data(format!("column \"{name}\" does not exist"))),
        }
    }
}

fn parse_cell(s: &str) -> Option<f64> {
    s.trim().parse::<f64>().ok().filter(|v| v.is_finite())
}

/// Reads a comma-separated file into a [`Dataset`].
///
/// The first row is a header iff any of its cells is non-numeric. Columns
/// named by `y_cols`, `group_col` and `time_col` are routed to Y, group
/// labels and timestamps; every other column goes to X.
pub fn load_dataset(
    path: &Path,
    y_cols: &[ColumnRef],
    group_col: Option<&ColumnRef>,
    time_col: Option<&ColumnRef>,
) -> Result<Dataset> {
    let file = File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(file);
    let mut records: Vec<Vec<String>> = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
        records.push(rec.iter().map(str::to_owned).collect());
    }
    let Some(first) = records.first() else {
        return Err(Error::Data(format!("{} is empty", path.display())));
    };
    let width = first.len();
    let has_header = first.iter().any(|c| parse_cell(c).is_none());
    let header: Option<Vec<String>> = has_header.then(|| first.iter().map(|c| c.trim().to_owned()).collect());
    let body = &records[usize::from(has_header)..];
    if body.is_empty() {
        return Err(Error::Data(format!("{} has no data rows", path.display())));
    }
    let line_offset = 1 + usize::from(has_header);
    if let Some(r) = body.iter().position(|r| r.len() != width) {
        return Err(Error::Data(format!(
            "ragged row {} ({} cells, expected {width})",
            r + line_offset,
            body[r].len()
        )));
    }

    let y_idx = y_cols
        .iter()
        .map(|c| c.resolve(header.as_deref(), width))
        .collect::<Result<Vec<_>>>()?;
    let g_idx = group_col
        .map(|c| c.resolve(header.as_deref(), width))
        .transpose()?;
    let t_idx = time_col
        .map(|c| c.resolve(header.as_deref(), width))
        .transpose()?;
    let x_idx: Vec<usize> = (0..width)
        .filter(|j| !y_idx.contains(j) && Some(*j) != g_idx && Some(*j) != t_idx)
        .collect();
    if x_idx.is_empty() {
        return Err(Error::Data("no columns left for X".into()));
    }

    let numeric = |cols: &[usize]| -> Result<Matrix> {
        let mut values = Vec::with_capacity(body.len() * cols.len());
        for (r, row) in body.iter().enumerate() {
            for &j in cols {
                let v = parse_cell(&row[j]).ok_or_else(|| {
                    Error::Data(format!(
                        "non-numeric cell at (row {}, col {}): {:?}",
                        r + line_offset,
                        j + 1,
                        row[j]
                    ))
                })?;
                values.push(v);
            }
        }
        Matrix::new(body.len(), cols.len(), values)
    };

    let mut ds = Dataset::new(numeric(&x_idx)?);
    if !y_idx.is_empty() {
        ds = ds.with_y(numeric(&y_idx)?)?;
    }
    if let Some(g) = g_idx {
        ds = ds.with_groups(body.iter().map(|r| r[g].trim().to_owned()).collect())?;
    }
    if let Some(t) = t_idx {
        ds = ds.with_timestamps(numeric(&[t])?.into_values())?;
    }
    if let Some(h) = &header {
        ds = ds.with_variable_names(x_idx.iter().map(|&j| h[j].clone()).collect())?;
    }
    Ok(ds)
}

/// Writes X (and Y, groups, timestamps when present) as CSV with a header.
pub fn write_dataset_csv(ds: &Dataset, path: &Path) -> Result<()> {
    let io = |e: csv::Error| Error::Data(format!("{}: {e}", path.display()));
    let mut w = csv::Writer::from_path(path).map_err(io)?;
    let mut header: Vec<String> = match ds.variable_names() {
        Some(n) => n.to_vec(),
        None => (1..=ds.n_vars()).map(|j| format!("x{j}")).collect(),
    };
    if let Some(y) = ds.y() {
        header.extend((1..=y.cols()).map(|j| format!("y{j}")));
    }
    if ds.groups().is_some() {
        header.push("group".into());
    }
    if ds.timestamps().is_some() {
        header.push("time".into());
    }
    w.write_record(&header).map_err(io)?;
    for i in 0..ds.n_rows() {
        let mut rec: Vec<String> = ds.x().row(i).iter().map(|v| format!("{v:?}")).collect();
        if let Some(y) = ds.y() {
            rec.extend(y.row(i).iter().map(|v| format!("{v:?}")));
        }
        if let Some(g) = ds.groups() {
            rec.push(g[i].clone());
        }
        if let Some(t) = ds.timestamps() {
            rec.push(format!("{:?}", t[i]));
        }
        w.write_record(&rec).map_err(io)?;
    }
    w.flush().map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn csv_file(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    #[test]
    fn plain_numeric_csv() {
        let f = csv_file("1,2\n3,4\n5,6\n");
        let ds = load_dataset(f.path(), &[], None, None).unwrap();
        assert_eq!(ds.x().shape(), (3, 2));
        assert!(ds.y().is_none());
        assert_eq!(ds.x().get(2, 1), 6.0);
    }

    #[test]
    fn last_column_routed_to_y() {
        let f = csv_file("1,2,3\n4,5,6\n");
        let ds = load_dataset(f.path(), &[ColumnRef::Index(-1)], None, None).unwrap();
        assert_eq!(ds.x().shape(), (2, 2));
        assert_eq!(ds.y().unwrap().column(0), vec![3.0, 6.0]);
    }

    #[test]
    fn header_detection_and_named_columns() {
        let f = csv_file("a,b,target,subject,t\n1,2,3,s1,10\n4,5,6,s2,20\n");
        let ds = load_dataset(
            f.path(),
            &[ColumnRef::Name("target".into())],
            Some(&ColumnRef::Name("subject".into())),
            Some(&ColumnRef::Name("t".into())),
        )
        .unwrap();
        assert_eq!(ds.x().shape(), (2, 2));
        assert_eq!(ds.variable_names().unwrap(), ["a", "b"]);
        assert_eq!(ds.groups().unwrap(), ["s1", "s2"]);
        assert_eq!(ds.timestamps().unwrap(), [10.0, 20.0]);
    }

    #[test]
    fn non_numeric_cell_is_reported() {
        let f = csv_file("1,2\nabc,4\n");
        let err = load_dataset(f.path(), &[], None, None).unwrap_err();
        assert!(err.to_string().contains("non-numeric cell at (row 2, col 1)"), "{err}");
    }

    #[test]
    fn missing_values_are_rejected() {
        let f = csv_file("1,2\n,4\n");
        assert!(load_dataset(f.path(), &[], None, None).is_err());
        let f = csv_file("1,2\nNaN,4\n");
        assert!(load_dataset(f.path(), &[], None, None).is_err());
    }

    #[test]
    fn ragged_and_absent_columns() {
        let f = csv_file("1,2\n3\n");
        assert!(load_dataset(f.path(), &[], None, None)
            .unwrap_err()
            .to_string()
            .contains("ragged"));
        let f = csv_file("1,2\n3,4\n");
        assert!(load_dataset(f.path(), &[ColumnRef::Index(5)], None, None).is_err());
        assert!(load_dataset(f.path(), &[ColumnRef::Name("y".into())], None, None).is_err());
    }

    #[test]
    fn missing_file() {
        let err = load_dataset(Path::new("/nonexistent/x.csv"), &[], None, None).unwrap_err();
        assert!(matches!(err, Error::Io { .. }));
    }

    #[test]
    fn written_csv_loads_back() {
        let x = Matrix::from_rows(&[vec![1.5, -2.0], vec![0.25, 3.0]]).unwrap();
        let ds = Dataset::new(x)
            .with_y(Matrix::column_vector(vec![1.0, 0.0]).unwrap())
            .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("d.csv");
        write_dataset_csv(&ds, &p).unwrap();
        let back = load_dataset(&p, &[ColumnRef::Name("y1".into())], None, None).unwrap();
        assert_eq!(back.x(), ds.x());
        assert_eq!(back.y(), ds.y());
    }

    #[test]
    fn annotation_lengths_checked() {
        let ds = Dataset::new(Matrix::zeros(3, 2));
        assert!(ds.clone().with_groups(vec!["a".into()]).is_err());
        assert!(ds.clone().with_y(Matrix::zeros(2, 1)).is_err());
        assert!(ds.with_timestamps(vec![1.0, 2.0]).is_err());
    }
}
