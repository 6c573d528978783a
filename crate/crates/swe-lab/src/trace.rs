//! Tabular per-step run records and their CSV form.
//!
//! A [`Trace`] is a header plus rows of optional numbers — optional because
//! some columns only exist in part of a run (stem eigenvalues vanish once
//! layers untie). Serialization uses the shortest round-trip decimal form of
//! each value, so a written trace reloads bit-exactly.

use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    columns: Vec<String>,
    rows: Vec<Vec<Option<f64>>>,
}

impl Trace {
    /// Empty trace with the given column names.
    ///
    /// Column names must be nonempty and free of commas and line breaks;
    /// violations panic immediately since they are programming errors.
    #[must_use]
    pub fn new(columns: &[&str]) -> Self {
        assert!(!columns.is_empty(), "trace needs at least one column");
        for c in columns {
            assert!(
                !c.is_empty() && !c.contains(',') && !c.contains('\n') && !c.contains('\r'),
                "bad column name {c:?}"
            );
        }
        Trace {
            columns: columns.iter().map(|c| (*c).to_string()).collect(),
            rows: Vec::new(),
        }
    }

    #[must_use]
    pub fn columns(&self) -> &[String] {
        &self.columns
    }

    #[must_use]
    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    #[must_use]
    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Appends a row.
    ///
    /// # Errors
    /// Fails when the row width does not match the header.
    pub fn push_row(&mut self, row: Vec<Option<f64>>) -> Result<()> {
        if row.len() != self.columns.len() {
            return Err(Error::InvalidArgument(format!(
                "row has {} cells, trace has {} columns",
                row.len(),
                self.columns.len()
            )));
        }
        self.rows.push(row);
        Ok(())
    }

    #[must_use]
    pub fn row(&self, i: usize) -> &[Option<f64>] {
        &self.rows[i]
    }

    #[must_use]
    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    /// Cell at `(row, column name)`; `None` when the column is unknown or the
    /// cell is empty.
    #[must_use]
    pub fn get(&self, row: usize, column: &str) -> Option<f64> {
        let idx = self.column_index(column)?;
        self.rows.get(row).and_then(|r| r[idx])
    }

    /// Cell of the last row; `None` when empty or unknown column.
    #[must_use]
    pub fn last(&self, column: &str) -> Option<f64> {
        if self.rows.is_empty() {
            return None;
        }
        self.get(self.rows.len() - 1, column)
    }

    /// Full column as a vector of optional cells.
    ///
    /// # Errors
    /// Fails when the column does not exist.
    pub fn column(&self, name: &str) -> Result<Vec<Option<f64>>> {
        let idx = self
            .column_index(name)
            .ok_or_else(|| Error::InvalidArgument(format!("no column named {name}")))?;
        Ok(self.rows.iter().map(|r| r[idx]).collect())
    }

    /// CSV text: header line, then one line per row; empty cells stay empty.
    #[must_use]
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        out.push_str(&self.columns.join(","));
        out.push('\n');
        for row in &self.rows {
            let mut first = true;
            for cell in row {
                if !first {
                    out.push(',');
                }
                first = false;
                if let Some(v) = cell {
                    out.push_str(&v.to_string());
                }
            }
            out.push('\n');
        }
        out
    }

    /// Parses CSV text produced by [`Trace::to_csv`].
    ///
    /// # Errors
    /// Fails on an empty header, a row of the wrong width, or an unparsable
    /// number — each reported with its 1-based line number.
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header = lines.next().ok_or(Error::Csv {
            line: 1,
            message: "missing header".into(),
        })?;
        let columns: Vec<String> = header.split(',').map(str::to_string).collect();
        if columns.iter().any(String::is_empty) {
            return Err(Error::Csv {
                line: 1,
                message: format!("empty column name in header {header:?}"),
            });
        }
        let mut trace = Trace {
            columns,
            rows: Vec::new(),
        };
        for (i, line) in lines.enumerate() {
            let line_no = i + 2;
            if line.is_empty() {
                continue;
            }
            let cells: Vec<&str> = line.split(',').collect();
            if cells.len() != trace.columns.len() {
                return Err(Error::Csv {
                    line: line_no,
                    message: format!(
                        "expected {} cells, found {}",
                        trace.columns.len(),
                        cells.len()
                    ),
                });
            }
            let mut row = Vec::with_capacity(cells.len());
            for cell in cells {
                if cell.is_empty() {
                    row.push(None);
                } else {
                    let v: f64 = cell.parse().map_err(|_| Error::Csv {
                        line: line_no,
                        message: format!("unparsable number {cell:?}"),
                    })?;
                    row.push(Some(v));
                }
            }
            trace.rows.push(row);
        }
        Ok(trace)
    }

    /// Writes [`Trace::to_csv`] to a file.
    ///
    /// # Errors
    /// Propagates I/O failures with the path attached.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv()).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })
    }

    /// Reads a CSV file written by [`Trace::write_csv`].
    ///
    /// # Errors
    /// Propagates I/O and parse failures.
    pub fn read_csv(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })?;
        Trace::from_csv(&text)
    }
}
