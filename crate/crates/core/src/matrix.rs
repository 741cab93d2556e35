use crate::error::{LadError, Result};

/// Dense row-major observation matrix with optional ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct DataMatrix {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
    labels: Option<Vec<bool>>,
    feature_names: Option<Vec<String>>,
    row_ids: Option<Vec<String>>,
}

impl DataMatrix {
    /// Builds a matrix from row-major values. Every value must be finite.
    pub fn from_row_major(rows: usize, cols: usize, values: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(LadError::domain(format!(
                "matrix must be non-empty, got {rows}x{cols}"
            )));
        }
        if values.len() != rows * cols {
            return Err(LadError::domain(format!(
                "expected {} values for a {rows}x{cols} matrix, got {}",
                rows * cols,
                values.len()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(LadError::domain(format!(
                "non-finite value at row {}, column {}",
                pos / cols,
                pos % cols
            )));
        }
        Ok(DataMatrix {
            rows,
            cols,
            values,
            labels: None,
            feature_names: None,
            row_ids: None,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if let Some(i) = rows.iter().position(|r| r.len() != cols) {
            return Err(LadError::domain(format!(
                "row {i} has {} values, expected {cols}",
                rows[i].len()
            )));
        }
        Self::from_row_major(rows.len(), cols, rows.concat())
    }

    pub fn with_labels(mut self, labels: Vec<bool>) -> Result<Self> {
        if labels.len() != self.rows {
            return Err(LadError::domain(format!(
                "{} labels for {} rows",
                labels.len(),
                self.rows
            )));
        }
        self.labels = Some(labels);
        Ok(self)
    }

    pub fn with_feature_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.cols {
            return Err(LadError::domain(format!(
                "{} feature names for {} columns",
                names.len(),
                self.cols
            )));
        }
        self.feature_names = Some(names);
        Ok(self)
    }

    pub fn with_row_ids(mut self, ids: Vec<String>) -> Result<Self> {
        if ids.len() != self.rows {
            return Err(LadError::domain(format!(
                "{} row ids for {} rows",
                ids.len(),
                self.rows
            )));
        }
        self.row_ids = Some(ids);
        Ok(self)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.cols..(i + 1) * self.cols]
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.cols + col]
    }

    pub fn labels(&self) -> Option<&[bool]> {
        self.labels.as_deref()
    }

    pub fn feature_names(&self) -> Option<&[String]> {
        self.feature_names.as_deref()
    }

    pub fn row_ids(&self) -> Option<&[String]> {
        self.row_ids.as_deref()
    }

    /// Keeps the first `cols` columns. Used by the dimension sweep.
    pub fn leading_columns(&self, cols: usize) -> Result<Self> {
        if cols == 0 || cols > self.cols {
            return Err(LadError::domain(format!(
                "cannot take {cols} of {} columns",
                self.cols
            )));
        }
        let values = (0..self.rows)
            .flat_map(|i| self.row(i)[..cols].iter().copied())
            .collect();
        let mut out = Self::from_row_major(self.rows, cols, values)?;
        out.labels = self.labels.clone();
        out.row_ids = self.row_ids.clone();
        out.feature_names = self.feature_names.as_ref().map(|n| n[..cols].to_vec());
        Ok(out)
    }

    /// Keeps the first `rows` rows.
    pub fn leading_rows(&self, rows: usize) -> Result<Self> {
        if rows == 0 || rows > self.rows {
            return Err(LadError::domain(format!(
                "cannot take {rows} of {} rows",
                self.rows
            )));
        }
        let mut out =
            Self::from_row_major(rows, self.cols, self.values[..rows * self.cols].to_vec())?;
        out.labels = self.labels.as_ref().map(|l| l[..rows].to_vec());
        out.row_ids = self.row_ids.as_ref().map(|r| r[..rows].to_vec());
        out.feature_names = self.feature_names.clone();
        Ok(out)
    }
}
