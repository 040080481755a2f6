use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{AssignmentError, Permutation};

/// Square matrix of finite pairwise losses. Rows are targets, columns are
/// estimates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawMatrix", into = "RawMatrix")]
pub struct CostMatrix {
    size: usize,
    entries: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct RawMatrix {
    size: usize,
    entries: Vec<Vec<f64>>,
}

impl TryFrom<RawMatrix> for CostMatrix {
    type Error = AssignmentError;

    fn try_from(raw: RawMatrix) -> Result<Self, Self::Error> {
        if raw.entries.len() != raw.size {
            return Err(AssignmentError::Shape(format!(
                "size is {} but {} rows were given",
                raw.size,
                raw.entries.len()
            )));
        }
        CostMatrix::from_rows(raw.entries)
    }
}

impl From<CostMatrix> for RawMatrix {
    fn from(m: CostMatrix) -> Self {
        RawMatrix {
            size: m.size,
            entries: m.rows().map(<[f64]>::to_vec).collect(),
        }
    }
}

impl CostMatrix {
    /// Builds a matrix from row-major entries.
    pub fn new(size: usize, entries: Vec<f64>) -> Result<Self, AssignmentError> {
        if size == 0 {
            return Err(AssignmentError::Empty);
        }
        if entries.len() != size * size {
            return Err(AssignmentError::Shape(format!(
                "expected {} entries for a {size}x{size} matrix, got {}",
                size * size,
                entries.len()
            )));
        }
        if let Some(k) = entries.iter().position(|x| !x.is_finite()) {
            return Err(AssignmentError::NonFinite {
                row: k / size,
                col: k % size,
            });
        }
        Ok(Self { size, entries })
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self, AssignmentError> {
        let size = rows.len();
        if size == 0 {
            return Err(AssignmentError::Empty);
        }
        if let Some((i, row)) = rows.iter().enumerate().find(|(_, r)| r.len() != size) {
            return Err(AssignmentError::Shape(format!(
                "row {i} has {} entries, expected {size}",
                row.len()
            )));
        }
        Self::new(size, rows.into_iter().flatten().collect())
    }

    /// Builds a matrix by evaluating `f(row, col)` for every cell.
    pub fn from_fn(
        size: usize,
        mut f: impl FnMut(usize, usize) -> f64,
    ) -> Result<Self, AssignmentError> {
        let mut entries = Vec::with_capacity(size * size);
        for i in 0..size {
            for j in 0..size {
                entries.push(f(i, j));
            }
        }
        Self::new(size, entries)
    }

    pub fn size(&self) -> usize {
        self.size
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.entries[row * self.size + col]
    }

    #[inline]
    pub fn row(&self, row: usize) -> &[f64] {
        &self.entries[row * self.size..(row + 1) * self.size]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.entries.chunks_exact(self.size)
    }

    /// Row-major entries.
    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn max_abs(&self) -> f64 {
        self.entries.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
    }

    /// Σ_i M[i][π(i)], accumulated in row order starting from 0.0.
    ///
    /// Every solver reports its total through this function so costs of the
    /// same permutation are bit-identical across solvers.
    pub fn permutation_cost(&self, permutation: &Permutation) -> f64 {
        permutation
            .as_slice()
            .iter()
            .enumerate()
            .fold(0.0, |acc, (i, &j)| acc + self.get(i, j))
    }

    /// Returns a copy with `delta` added to every entry of `row`.
    pub fn with_row_shift(&self, row: usize, delta: f64) -> Result<Self, AssignmentError> {
        let mut entries = self.entries.clone();
        for x in &mut entries[row * self.size..(row + 1) * self.size] {
            *x += delta;
        }
        Self::new(self.size, entries)
    }

    /// Returns a copy with `delta` added to every entry of `col`.
    pub fn with_col_shift(&self, col: usize, delta: f64) -> Result<Self, AssignmentError> {
        let mut entries = self.entries.clone();
        for i in 0..self.size {
            entries[i * self.size + col] += delta;
        }
        Self::new(self.size, entries)
    }

    /// Plain-text form: the size on the first line, then one line of
    /// space-separated values per row. Values use the shortest decimal
    /// representation that round-trips.
    pub fn to_text(&self) -> String {
        let mut out = format!("{}\n", self.size);
        for row in self.rows() {
            let mut first = true;
            for x in row {
                if !first {
                    out.push(' ');
                }
                first = false;
                let _ = write!(out, "{x}");
            }
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self, AssignmentError> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(n, l)| (n + 1, l))
            .filter(|(_, l)| !l.trim().is_empty());

        let (size_line, header) = lines.next().ok_or(AssignmentError::Parse {
            line: 1,
            column: 1,
            message: "empty input".into(),
        })?;
        let header_col = header.len() - header.trim_start().len() + 1;
        let size: usize = header.trim().parse().map_err(|_| AssignmentError::Parse {
            line: size_line,
            column: header_col,
            message: format!("expected matrix size, found `{}`", header.trim()),
        })?;
        if size == 0 {
            return Err(AssignmentError::Empty);
        }

        let mut entries = Vec::with_capacity(size * size);
        let mut last_line = size_line;
        for row in 0..size {
            let (line_no, line) = lines.next().ok_or_else(|| AssignmentError::Parse {
                line: last_line + 1,
                column: 1,
                message: format!("expected {size} rows, found {row}"),
            })?;
            last_line = line_no;
            let mut count = 0;
            for (column, token) in tokens_with_columns(line) {
                if count == size {
                    return Err(AssignmentError::Parse {
                        line: line_no,
                        column,
                        message: format!("row has more than {size} values"),
                    });
                }
                let value: f64 = token.parse().map_err(|_| AssignmentError::Parse {
                    line: line_no,
                    column,
                    message: format!("invalid number `{token}`"),
                })?;
                if !value.is_finite() {
                    return Err(AssignmentError::Parse {
                        line: line_no,
                        column,
                        message: format!("non-finite value `{token}`"),
                    });
                }
                entries.push(value);
                count += 1;
            }
            if count != size {
                return Err(AssignmentError::Parse {
                    line: line_no,
                    column: line.len() + 1,
                    message: format!("row has {count} values, expected {size}"),
                });
            }
        }
        if let Some((line_no, line)) = lines.next() {
            return Err(AssignmentError::Parse {
                line: line_no,
                column: line.len() - line.trim_start().len() + 1,
                message: format!("trailing content after {size} rows"),
            });
        }
        Self::new(size, entries)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("matrix serialises")
    }

    pub fn from_json(text: &str) -> Result<Self, AssignmentError> {
        serde_json::from_str(text).map_err(|e| {
            // Validation failures from `try_from` carry no position (line 0).
            AssignmentError::Parse {
                line: e.line().max(1),
                column: e.column().max(1),
                message: e.to_string(),
            }
        })
    }

    /// Accepts either the JSON or the plain-text form.
    pub fn parse(text: &str) -> Result<Self, AssignmentError> {
        if text.trim_start().starts_with('{') {
            Self::from_json(text)
        } else {
            Self::from_text(text)
        }
    }
}

/// Whitespace-separated tokens with their 1-based character columns.
fn tokens_with_columns(line: &str) -> impl Iterator<Item = (usize, &str)> {
    let mut rest = line;
    let mut offset = 0;
    std::iter::from_fn(move || {
        let trimmed = rest.trim_start();
        offset += rest.len() - trimmed.len();
        if trimmed.is_empty() {
            return None;
        }
        let end = trimmed.find(char::is_whitespace).unwrap_or(trimmed.len());
        let token = &trimmed[..end];
        let column = line[..offset].chars().count() + 1;
        offset += end;
        rest = &trimmed[end..];
        Some((column, token))
    })
}
