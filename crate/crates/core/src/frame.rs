//! Table types shared by every stage of the pipeline.
//!
//! [`RawTable`] holds cells as read from CSV (numbers or text), column-wise.
//! [`FrameTable`] is the dense, all-numeric, row-major table used from
//! one-hot encoding onward.

use std::collections::HashSet;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

/// A single CSV cell after type sniffing.
#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Number(f64),
    Text(String),
}

impl Cell {
    /// Numbers parse, everything else stays text. Empty fields are `Text("")`.
    pub fn sniff(field: &str) -> Cell {
        let trimmed = field.trim();
        if trimmed.is_empty() {
            return Cell::Text(String::new());
        }
        match trimmed.parse::<f64>() {
            Ok(v) if v.is_finite() => Cell::Number(v),
            _ => Cell::Text(field.to_string()),
        }
    }

    pub fn as_text(&self) -> String {
        match self {
            Cell::Number(v) => format!("{v}"),
            Cell::Text(s) => s.clone(),
        }
    }

    fn key(&self) -> CellKey {
        match self {
            Cell::Number(v) => CellKey::Number(v.to_bits()),
            Cell::Text(s) => CellKey::Text(s.clone()),
        }
    }
}

#[derive(Hash, PartialEq, Eq)]
enum CellKey {
    Number(u64),
    Text(String),
}

/// Column-oriented table of sniffed cells.
#[derive(Debug, Clone, PartialEq)]
pub struct RawTable {
    names: Vec<String>,
    columns: Vec<Vec<Cell>>,
}

impl RawTable {
    pub fn new(names: Vec<String>, columns: Vec<Vec<Cell>>) -> Result<Self> {
        if names.len() != columns.len() {
            return Err(Error::validation(format!(
                "{} column names for {} columns",
                names.len(),
                columns.len()
            )));
        }
        check_unique(&names)?;
        if let Some(first) = columns.first() {
            let len = first.len();
            if let Some((i, _)) = columns.iter().enumerate().find(|(_, c)| c.len() != len) {
                return Err(Error::validation(format!(
                    "column '{}' has {} cells, expected {len}",
                    names[i],
                    columns[i].len()
                )));
            }
        }
        Ok(RawTable { names, columns })
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn columns(&self) -> &[Vec<Cell>] {
        &self.columns
    }

    pub fn n_rows(&self) -> usize {
        self.columns.first().map_or(0, Vec::len)
    }

    pub fn n_cols(&self) -> usize {
        self.names.len()
    }

    pub fn cell(&self, row: usize, col: usize) -> &Cell {
        &self.columns[col][row]
    }

    /// New table made of the given rows, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> RawTable {
        let columns = self
            .columns
            .iter()
            .map(|col| rows.iter().map(|&r| col[r].clone()).collect())
            .collect();
        RawTable {
            names: self.names.clone(),
            columns,
        }
    }

    pub(crate) fn row_key(&self, row: usize) -> Vec<impl std::hash::Hash + Eq> {
        self.columns.iter().map(|c| c[row].key()).collect()
    }
}

/// Dense numeric table with named columns, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameTable {
    names: Vec<String>,
    data: Vec<f64>,
    n_rows: usize,
}

impl FrameTable {
    pub fn new(names: Vec<String>, data: Vec<f64>, n_rows: usize) -> Result<Self> {
        check_unique(&names)?;
        if data.len() != n_rows * names.len() {
            return Err(Error::validation(format!(
                "{} values do not fill {n_rows} rows x {} columns",
                data.len(),
                names.len()
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            let col = if names.is_empty() { 0 } else { pos % names.len() };
            return Err(Error::validation(format!(
                "non-finite value in column '{}'",
                names.get(col).map_or("?", String::as_str)
            )));
        }
        Ok(FrameTable {
            names,
            data,
            n_rows,
        })
    }

    pub fn from_columns(names: Vec<String>, columns: Vec<Vec<f64>>) -> Result<Self> {
        if names.len() != columns.len() {
            return Err(Error::validation(format!(
                "{} column names for {} columns",
                names.len(),
                columns.len()
            )));
        }
        let n_rows = columns.first().map_or(0, Vec::len);
        if let Some(i) = columns.iter().position(|c| c.len() != n_rows) {
            return Err(Error::validation(format!(
                "column '{}' has {} values, expected {n_rows}",
                names[i],
                columns[i].len()
            )));
        }
        let n_cols = columns.len();
        let mut data = vec![0.0; n_rows * n_cols];
        for (j, col) in columns.iter().enumerate() {
            for (i, &v) in col.iter().enumerate() {
                data[i * n_cols + j] = v;
            }
        }
        FrameTable::new(names, data, n_rows)
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.names.len()
    }

    pub fn column_names(&self) -> &[String] {
        &self.names
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub(crate) fn require_column(&self, name: &str) -> Result<usize> {
        self.column_index(name)
            .ok_or_else(|| Error::validation(format!("column '{name}' not found")))
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let w = self.n_cols();
        &self.data[i * w..(i + 1) * w]
    }

    pub fn value(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.n_cols() + col]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.n_rows).map(|i| self.value(i, j)).collect()
    }

    pub fn column_by_name(&self, name: &str) -> Result<Vec<f64>> {
        Ok(self.column(self.require_column(name)?))
    }

    /// Column-major copy of the data.
    pub fn to_columns(&self) -> Vec<Vec<f64>> {
        (0..self.n_cols()).map(|j| self.column(j)).collect()
    }

    pub fn select_rows(&self, rows: &[usize]) -> FrameTable {
        let w = self.n_cols();
        let mut data = Vec::with_capacity(rows.len() * w);
        for &r in rows {
            data.extend_from_slice(self.row(r));
        }
        FrameTable {
            names: self.names.clone(),
            data,
            n_rows: rows.len(),
        }
    }

    /// Removes the named columns; every name must exist.
    pub fn drop_columns<S: AsRef<str>>(&self, drop: &[S]) -> Result<FrameTable> {
        let mut dropped = vec![false; self.n_cols()];
        for name in drop {
            dropped[self.require_column(name.as_ref())?] = true;
        }
        let keep: Vec<usize> = (0..self.n_cols()).filter(|&j| !dropped[j]).collect();
        Ok(self.select_columns(&keep))
    }

    pub fn select_columns(&self, cols: &[usize]) -> FrameTable {
        let names = cols.iter().map(|&j| self.names[j].clone()).collect();
        let mut data = Vec::with_capacity(self.n_rows * cols.len());
        for i in 0..self.n_rows {
            let row = self.row(i);
            data.extend(cols.iter().map(|&j| row[j]));
        }
        FrameTable {
            names,
            data,
            n_rows: self.n_rows,
        }
    }

    pub fn map_column(&mut self, j: usize, f: impl Fn(f64) -> f64) {
        let w = self.n_cols();
        for i in 0..self.n_rows {
            let v = &mut self.data[i * w + j];
            *v = f(*v);
        }
    }

    /// Columns of `self` followed by the columns of `right`.
    pub fn hconcat(&self, right: &FrameTable) -> Result<FrameTable> {
        if self.n_rows != right.n_rows {
            return Err(Error::validation(format!(
                "cannot concatenate {} rows with {} rows",
                self.n_rows, right.n_rows
            )));
        }
        let mut names = self.names.clone();
        names.extend(right.names.iter().cloned());
        check_unique(&names)?;
        let mut data = Vec::with_capacity(self.data.len() + right.data.len());
        for i in 0..self.n_rows {
            data.extend_from_slice(self.row(i));
            data.extend_from_slice(right.row(i));
        }
        Ok(FrameTable {
            names,
            data,
            n_rows: self.n_rows,
        })
    }

    /// CSV with a header row, ',' separator and shortest round-trip floats.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let to_err = |e: csv::Error| Error::Format(format!("csv write failed: {e}"));
        w.write_record(&self.names).map_err(to_err)?;
        let mut buf = Vec::with_capacity(self.n_cols());
        for i in 0..self.n_rows {
            buf.clear();
            buf.extend(self.row(i).iter().map(|v| format!("{v:?}")));
            w.write_record(&buf).map_err(to_err)?;
        }
        w.flush()
            .map_err(|e| Error::Format(format!("csv write failed: {e}")))
    }

    pub fn write_csv_file(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(file))
    }

    /// Reads a table previously written by [`FrameTable::write_csv`].
    pub fn read_csv_file(path: &Path) -> Result<FrameTable> {
        let mut rdr = csv::Reader::from_path(path)
            .map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
        let names: Vec<String> = rdr
            .headers()
            .map_err(|e| Error::Format(e.to_string()))?
            .iter()
            .map(str::to_string)
            .collect();
        let mut data = Vec::new();
        let mut n_rows = 0;
        for rec in rdr.records() {
            let rec = rec.map_err(|e| Error::Parse {
                line: e.position().map_or(0, |p| p.line()),
                reason: e.to_string(),
            })?;
            for field in rec.iter() {
                data.push(field.parse::<f64>().map_err(|e| Error::Parse {
                    line: rec.position().map_or(0, |p| p.line()),
                    reason: format!("'{field}': {e}"),
                })?);
            }
            n_rows += 1;
        }
        FrameTable::new(names, data, n_rows)
    }
}

fn check_unique(names: &[String]) -> Result<()> {
    let mut seen = HashSet::with_capacity(names.len());
    for n in names {
        if !seen.insert(n.as_str()) {
            return Err(Error::validation(format!("duplicate column name '{n}'")));
        }
    }
    Ok(())
}
