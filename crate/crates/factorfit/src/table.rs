//! Labeled two-way contingency tables of non-negative integer counts.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// A labeled m x n matrix of non-negative integer observations.
///
/// Rows and columns carry unique labels; the matrix is rectangular with
/// m >= 2 and n >= 2. Tables are immutable after construction, so shared
/// references are safe to use from multiple threads.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContingencyTable {
    row_labels: Vec<String>,
    col_labels: Vec<String>,
    cells: Vec<Vec<u32>>,
}

/// One labeled row or column extracted from a table.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeriesSample {
    pub label: String,
    pub values: Vec<u32>,
}

impl SeriesSample {
    pub fn new(label: impl Into<String>, values: Vec<u32>) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::validation("a series needs at least 2 values"));
        }
        Ok(SeriesSample {
            label: label.into(),
            values,
        })
    }

    pub fn n(&self) -> usize {
        self.values.len()
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().map(|v| *v as f64).sum::<f64>() / self.values.len() as f64
    }

    /// Values as floats, in table order.
    pub fn as_f64(&self) -> Vec<f64> {
        self.values.iter().map(|v| *v as f64).collect()
    }
}

impl ContingencyTable {
    /// Build a table from labels and cells, checking all invariants.
    pub fn new(
        row_labels: Vec<String>,
        col_labels: Vec<String>,
        cells: Vec<Vec<u32>>,
    ) -> Result<Self> {
        if row_labels.len() < 2 || col_labels.len() < 2 {
            return Err(Error::validation(
                "a table needs at least 2 rows and 2 columns",
            ));
        }
        if cells.len() != row_labels.len() {
            return Err(Error::validation(format!(
                "{} row labels but {} data rows",
                row_labels.len(),
                cells.len()
            )));
        }
        for (i, row) in cells.iter().enumerate() {
            if row.len() != col_labels.len() {
                return Err(Error::validation(format!(
                    "row {} has {} cells, expected {}",
                    i,
                    row.len(),
                    col_labels.len()
                )));
            }
        }
        for (axis, labels) in [("row", &row_labels), ("column", &col_labels)] {
            for (i, l) in labels.iter().enumerate() {
                if labels[..i].contains(l) {
                    return Err(Error::validation(format!("duplicate {axis} label {l:?}")));
                }
            }
        }
        Ok(ContingencyTable {
            row_labels,
            col_labels,
            cells,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.row_labels.len()
    }

    pub fn n_cols(&self) -> usize {
        self.col_labels.len()
    }

    pub fn row_labels(&self) -> &[String] {
        &self.row_labels
    }

    pub fn col_labels(&self) -> &[String] {
        &self.col_labels
    }

    pub fn cell(&self, i: usize, j: usize) -> u32 {
        self.cells[i][j]
    }

    pub fn cells(&self) -> &[Vec<u32>] {
        &self.cells
    }

    pub fn row_totals(&self) -> Vec<f64> {
        self.cells
            .iter()
            .map(|r| r.iter().map(|v| *v as f64).sum())
            .collect()
    }

    pub fn col_totals(&self) -> Vec<f64> {
        (0..self.n_cols())
            .map(|j| self.cells.iter().map(|r| r[j] as f64).sum())
            .collect()
    }

    pub fn grand_total(&self) -> f64 {
        self.cells
            .iter()
            .map(|r| r.iter().map(|v| *v as f64).sum::<f64>())
            .sum()
    }

    /// All cells flattened row-major.
    pub fn pooled_values(&self) -> Vec<u32> {
        self.cells.iter().flatten().copied().collect()
    }

    /// Remove the named rows, keeping order of the remainder.
    pub fn drop_rows(&self, labels: &[&str]) -> Result<ContingencyTable> {
        for l in labels {
            if !self.row_labels.iter().any(|r| r == l) {
                return Err(Error::validation(format!("no row labeled {l:?}")));
            }
        }
        let keep: Vec<usize> = (0..self.n_rows())
            .filter(|i| !labels.contains(&self.row_labels[*i].as_str()))
            .collect();
        ContingencyTable::new(
            keep.iter().map(|&i| self.row_labels[i].clone()).collect(),
            self.col_labels.clone(),
            keep.iter().map(|&i| self.cells[i].clone()).collect(),
        )
    }

    pub fn row_series(&self, i: usize) -> Result<SeriesSample> {
        if i >= self.n_rows() {
            return Err(Error::validation(format!("row index {i} out of range")));
        }
        SeriesSample::new(self.row_labels[i].clone(), self.cells[i].clone())
    }

    pub fn col_series(&self, j: usize) -> Result<SeriesSample> {
        if j >= self.n_cols() {
            return Err(Error::validation(format!("column index {j} out of range")));
        }
        SeriesSample::new(
            self.col_labels[j].clone(),
            self.cells.iter().map(|r| r[j]).collect(),
        )
    }

    /// Parse comma-delimited text: header row of column labels, then one line
    /// per row starting with its label. Whitespace around fields is trimmed.
    pub fn parse_csv(source: &str) -> Result<ContingencyTable> {
        let mut lines = source
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines
            .next()
            .ok_or_else(|| Error::parse("line 1", "empty input"))?;
        let mut header_fields = split_csv_line(header);
        if header_fields.len() < 3 {
            return Err(Error::parse(
                "line 1",
                "expected a label column and at least 2 data columns",
            ));
        }
        header_fields.remove(0);
        let col_labels = header_fields;

        let mut row_labels = Vec::new();
        let mut cells = Vec::new();
        for (lineno, line) in lines {
            let loc = format!("line {}", lineno + 1);
            let mut fields = split_csv_line(line);
            if fields.len() != col_labels.len() + 1 {
                return Err(Error::parse(
                    loc,
                    format!(
                        "expected {} fields, found {}",
                        col_labels.len() + 1,
                        fields.len()
                    ),
                ));
            }
            let label = fields.remove(0);
            let mut row = Vec::with_capacity(fields.len());
            for (j, f) in fields.iter().enumerate() {
                let v: u32 = f.parse().map_err(|_| {
                    Error::parse(
                        format!("{loc}, column {}", j + 2),
                        format!("{f:?} is not a non-negative integer"),
                    )
                })?;
                row.push(v);
            }
            row_labels.push(label);
            cells.push(row);
        }
        ContingencyTable::new(row_labels, col_labels, cells)
    }

    /// Serialize back to the CSV layout accepted by [`parse_csv`](Self::parse_csv).
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        out.push_str("label");
        for c in &self.col_labels {
            out.push(',');
            out.push_str(c);
        }
        out.push('\n');
        for (label, row) in self.row_labels.iter().zip(&self.cells) {
            out.push_str(label);
            for v in row {
                out.push(',');
                out.push_str(&v.to_string());
            }
            out.push('\n');
        }
        out
    }

    /// The bundled dataset: disc-diffusion inhibition zones (millimetres) of
    /// essential-oil extracts from 10 plant species measured against 11
    /// bacterial strains. Ships compiled in so golden tests and the CLI run
    /// without external files.
    pub fn bundled_dataset() -> ContingencyTable {
        let rows = [
            ("M.flavus", [25, 25, 19, 19, 13, 22, 23, 15, 35, 30]),
            ("B.subtilis", [24, 22, 18, 18, 12, 20, 22, 14, 34, 28]),
            ("S.epidermidis", [20, 20, 14, 14, 12, 18, 18, 12, 30, 26]),
            ("S.aureus", [22, 20, 16, 14, 10, 18, 18, 12, 32, 28]),
            ("S.enteritidis", [20, 20, 13, 10, 9, 16, 18, 10, 27, 24]),
            ("S.typhimurium", [18, 17, 11, 8, 8, 16, 16, 10, 25, 20]),
            ("E.coli", [16, 16, 12, 9, 9, 14, 14, 10, 26, 22]),
            ("E.cloacae", [14, 14, 9, 9, 9, 12, 12, 10, 25, 22]),
            ("L.monocytogenes", [16, 13, 9, 8, 8, 10, 11, 9, 25, 18]),
            ("P. mirabilis", [10, 11, 0, 0, 0, 7, 8, 0, 22, 18]),
            ("P. aeruginosa", [10, 10, 0, 0, 0, 6, 8, 0, 20, 16]),
        ];
        let col_labels = [
            "M.s.", "M.p.", "C.l.", "C.a.", "M.c.", "L.a.", "O.b.", "S.o.", "O.v.", "T.v.",
        ];
        ContingencyTable::new(
            rows.iter().map(|(l, _)| l.to_string()).collect(),
            col_labels.iter().map(|l| l.to_string()).collect(),
            rows.iter().map(|(_, r)| r.to_vec()).collect(),
        )
        .expect("bundled dataset is valid")
    }
}

fn split_csv_line(line: &str) -> Vec<String> {
    line.split(',').map(|f| f.trim().to_string()).collect()
}
