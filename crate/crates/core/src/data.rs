//! Datasets with designated conditioned (I) and conditioning (J) columns.

use crate::error::{Error, Result};
use std::io::{Read, Write};
use std::path::Path;

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    /// Column-major values, `columns[c][row]`.
    columns: Vec<Vec<f64>>,
    names: Vec<String>,
    i_cols: Vec<usize>,
    j_cols: Vec<usize>,
}

fn default_names(d: usize) -> Vec<String> {
    (1..=d).map(|k| format!("x{k}")).collect()
}

impl Dataset {
    /// Builds a dataset from columns. Columns must share a common length and
    /// contain only finite values; `i_cols` and `j_cols` must be disjoint,
    /// with at least one column each.
    pub fn new(columns: Vec<Vec<f64>>, i_cols: Vec<usize>, j_cols: Vec<usize>) -> Result<Self> {
        let names = default_names(columns.len());
        Dataset::with_names(columns, names, i_cols, j_cols)
    }

    pub fn with_names(
        columns: Vec<Vec<f64>>,
        names: Vec<String>,
        i_cols: Vec<usize>,
        j_cols: Vec<usize>,
    ) -> Result<Self> {
        let d = columns.len();
        if names.len() != d {
            return Err(Error::Data(format!("{} names for {d} columns", names.len())));
        }
        let n = columns.first().map_or(0, Vec::len);
        if columns.iter().any(|c| c.len() != n) {
            return Err(Error::Data("columns have different lengths".into()));
        }
        if let Some((c, _)) = columns
            .iter()
            .enumerate()
            .find(|(_, col)| col.iter().any(|v| !v.is_finite()))
        {
            return Err(Error::Data(format!("column '{}' has missing or non-finite values", names[c])));
        }
        if i_cols.len() < 2 {
            return Err(Error::Config("at least two conditioned columns are required".into()));
        }
        if j_cols.is_empty() {
            return Err(Error::Config("at least one conditioning column is required".into()));
        }
        for &c in i_cols.iter().chain(&j_cols) {
            if c >= d {
                return Err(Error::Config(format!("column index {c} out of range (d = {d})")));
            }
        }
        let mut all: Vec<usize> = i_cols.iter().chain(&j_cols).copied().collect();
        all.sort_unstable();
        if all.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Config("conditioned and conditioning columns must be disjoint".into()));
        }
        Ok(Dataset { columns, names, i_cols, j_cols })
    }

    /// Dataset whose first `p` columns are conditioned and the rest conditioning.
    pub fn from_rows(rows: &[Vec<f64>], p: usize) -> Result<Self> {
        let d = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != d) {
            return Err(Error::Data("rows have different lengths".into()));
        }
        let columns = (0..d).map(|c| rows.iter().map(|r| r[c]).collect()).collect();
        Dataset::new(columns, (0..p).collect(), (p..d).collect())
    }

    pub fn n(&self) -> usize {
        self.columns.first().map_or(0, Vec::len)
    }

    pub fn d(&self) -> usize {
        self.columns.len()
    }

    pub fn p(&self) -> usize {
        self.i_cols.len()
    }

    pub fn q(&self) -> usize {
        self.j_cols.len()
    }

    pub fn column(&self, c: usize) -> &[f64] {
        &self.columns[c]
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn i_cols(&self) -> &[usize] {
        &self.i_cols
    }

    pub fn j_cols(&self) -> &[usize] {
        &self.j_cols
    }

    pub fn i_column(&self, k: usize) -> &[f64] {
        &self.columns[self.i_cols[k]]
    }

    pub fn j_column(&self, l: usize) -> &[f64] {
        &self.columns[self.j_cols[l]]
    }

    /// True when any conditioned or conditioning column has repeated values.
    pub fn has_ties(&self) -> bool {
        self.i_cols.iter().chain(&self.j_cols).any(|&c| {
            let mut v = self.columns[c].clone();
            v.sort_by(f64::total_cmp);
            v.windows(2).any(|w| w[0] == w[1])
        })
    }

    /// Rows `rows` (with repetition) in the given order.
    pub fn select(&self, rows: &[usize]) -> Dataset {
        Dataset {
            columns: self.columns.iter().map(|c| rows.iter().map(|&r| c[r]).collect()).collect(),
            names: self.names.clone(),
            i_cols: self.i_cols.clone(),
            j_cols: self.j_cols.clone(),
        }
    }

    /// Replaces the value of every column with `f`, keeping the layout.
    pub fn map_column<F: Fn(f64) -> f64>(&self, c: usize, f: F) -> Dataset {
        let mut out = self.clone();
        for v in &mut out.columns[c] {
            *v = f(*v);
        }
        out
    }

    /// Resolves a comma-separated list of column names or 0-based indices.
    pub fn resolve_columns(names: &[String], spec: &str) -> Result<Vec<usize>> {
        spec.split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| {
                names
                    .iter()
                    .position(|n| n == s)
                    .or_else(|| s.parse::<usize>().ok().filter(|&i| i < names.len()))
                    .ok_or_else(|| Error::Config(format!("unknown column '{s}'")))
            })
            .collect()
    }

    /// Reads a headed CSV file; `i_spec` and `j_spec` select columns by
    /// name or 0-based index.
    pub fn read_csv<R: Read>(reader: R, i_spec: &str, j_spec: &str) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
        let names: Vec<String> = rdr.headers()?.iter().map(|s| s.trim().to_string()).collect();
        let i_cols = Dataset::resolve_columns(&names, i_spec)?;
        let j_cols = Dataset::resolve_columns(&names, j_spec)?;
        let mut columns = vec![Vec::new(); names.len()];
        for (line, rec) in rdr.records().enumerate() {
            let rec = rec?;
            if rec.len() != names.len() {
                return Err(Error::Data(format!("row {} has {} fields", line + 1, rec.len())));
            }
            for (c, field) in rec.iter().enumerate() {
                let v: f64 = field.trim().parse().map_err(|_| {
                    Error::Data(format!("row {}, column '{}': cannot parse '{field}'", line + 1, names[c]))
                })?;
                columns[c].push(v);
            }
        }
        Dataset::with_names(columns, names, i_cols, j_cols)
    }

    pub fn from_csv_path(path: &Path, i_spec: &str, j_spec: &str) -> Result<Self> {
        let f = std::fs::File::open(path)
            .map_err(|e| Error::Data(format!("cannot open {}: {e}", path.display())))?;
        Dataset::read_csv(std::io::BufReader::new(f), i_spec, j_spec)
    }

    /// Writes all columns with a header, using shortest round-trip float formatting.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(&self.names)?;
        let mut rec = Vec::with_capacity(self.d());
        for r in 0..self.n() {
            rec.clear();
            rec.extend(self.columns.iter().map(|c| format!("{:?}", c[r])));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}
