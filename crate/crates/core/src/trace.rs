//! Recorded simulation output and its on-disk CSV form.
//!
//! A trace is a rectangular table of f64 samples with named columns, one row
//! per control period. CSV serialization uses Rust's shortest round-trip
//! float formatting in scientific notation, so writing and re-reading a trace
//! reproduces every value bit for bit, and equal traces serialize to equal
//! bytes.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::TraceError;

#[derive(Debug, Clone, PartialEq)]
pub struct SimTrace {
    columns: Vec<String>,
    /// Row-major samples; `data.len()` is always a multiple of the column count.
    data: Vec<f64>,
}

impl SimTrace {
    /// Creates an empty trace with the given schema. Column names must be
    /// nonempty, unique, and free of commas and line breaks; this is a
    /// programming contract, not an input validation path.
    pub fn new(columns: Vec<String>) -> Self {
        assert!(!columns.is_empty(), "a trace needs at least one column");
        for (i, c) in columns.iter().enumerate() {
            assert!(
                !c.is_empty() && !c.contains([',', '\n', '\r']),
                "bad column name {c:?}"
            );
            assert!(!columns[..i].contains(c), "duplicate column name {c:?}");
        }
        Self {
            columns,
            data: Vec::new(),
        }
    }

    pub fn n_cols(&self) -> usize {
        self.columns.len()
    }

    pub fn n_rows(&self) -> usize {
        self.data.len() / self.columns.len()
    }

    pub fn columns(&self) -> &[String] {
        &self.columns
    }

    pub fn push_row(&mut self, row: Vec<f64>) -> Result<(), TraceError> {
        if row.len() != self.columns.len() {
            return Err(TraceError::Malformed(format!(
                "row has {} values, schema has {} columns",
                row.len(),
                self.columns.len()
            )));
        }
        self.data.extend(row);
        Ok(())
    }

    pub fn column_index(&self, name: &str) -> Result<usize, TraceError> {
        self.columns
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| TraceError::MissingColumn(name.to_string()))
    }

    /// All samples of one column, in time order.
    pub fn column(&self, name: &str) -> Result<Vec<f64>, TraceError> {
        let idx = self.column_index(name)?;
        let w = self.n_cols();
        Ok(self.data.iter().skip(idx).step_by(w).copied().collect())
    }

    /// One row as a slice, in schema order.
    pub fn row(&self, r: usize) -> &[f64] {
        let w = self.n_cols();
        &self.data[r * w..(r + 1) * w]
    }

    pub fn value(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.n_cols() + col]
    }

    /// The time column; every engine-produced trace has one.
    pub fn times(&self) -> Result<Vec<f64>, TraceError> {
        self.column("t")
    }

    pub fn to_csv_string(&self) -> String {
        let mut out = String::new();
        out.push_str(&self.columns.join(","));
        out.push('\n');
        let w = self.n_cols();
        for row in self.data.chunks(w) {
            for (k, v) in row.iter().enumerate() {
                if k > 0 {
                    out.push(',');
                }
                // {:e} is shortest-round-trip and never expands tiny values
                // into hundreds of digits the way plain formatting would
                write!(out, "{v:e}").expect("writing to a String cannot fail");
            }
            out.push('\n');
        }
        out
    }

    pub fn from_csv_str(s: &str) -> Result<Self, TraceError> {
        let mut lines = s.lines();
        let header = lines
            .next()
            .ok_or_else(|| TraceError::Malformed("no header line".into()))?;
        let columns: Vec<String> = header.split(',').map(str::to_string).collect();
        if columns.iter().any(|c| c.is_empty()) {
            return Err(TraceError::Malformed("empty column name in header".into()));
        }
        let w = columns.len();
        let mut data = Vec::new();
        for (lineno, line) in lines.enumerate() {
            if line.is_empty() {
                continue;
            }
            let mut count = 0;
            for field in line.split(',') {
                let v: f64 = field.parse().map_err(|_| {
                    TraceError::Malformed(format!(
                        "line {}: cannot parse {field:?} as a number",
                        lineno + 2
                    ))
                })?;
                data.push(v);
                count += 1;
            }
            if count != w {
                return Err(TraceError::Malformed(format!(
                    "line {}: {} fields, header has {}",
                    lineno + 2,
                    count,
                    w
                )));
            }
        }
        Ok(Self { columns, data })
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<(), TraceError> {
        let path = path.as_ref();
        fs::write(path, self.to_csv_string()).map_err(|source| TraceError::Io {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self, TraceError> {
        let path = path.as_ref();
        let s = fs::read_to_string(path).map_err(|source| TraceError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_csv_str(&s)
    }
}
