use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Dense sample matrix: rows are samples, columns are variables.
///
/// Every entry is finite and there is at least one row and one column.
/// Estimators that need a covariance additionally require two rows and
/// check that themselves.
#[derive(Debug, Clone, PartialEq)]
pub struct DataMatrix(DMatrix<f64>);

impl DataMatrix {
    pub fn new(values: DMatrix<f64>) -> Result<Self> {
        if values.nrows() == 0 || values.ncols() == 0 {
            return Err(Error::DegenerateInput(format!(
                "data matrix must be non-empty, got {}x{}",
                values.nrows(),
                values.ncols()
            )));
        }
        for col in 0..values.ncols() {
            for row in 0..values.nrows() {
                if !values[(row, col)].is_finite() {
                    return Err(Error::NonFinite { row, col });
                }
            }
        }
        Ok(DataMatrix(values))
    }

    /// Builds a matrix from row vectors, which must all have the same length.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n_cols = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().position(|r| r.len() != n_cols) {
            return Err(Error::ShapeMismatch {
                expected: format!("{n_cols} columns"),
                found: format!("{} columns in row {bad}", rows[bad].len()),
            });
        }
        let values = DMatrix::from_fn(rows.len(), n_cols, |i, j| rows[i][j]);
        Self::new(values)
    }

    pub fn n_samples(&self) -> usize {
        self.0.nrows()
    }

    pub fn n_variables(&self) -> usize {
        self.0.ncols()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.0
    }

    pub fn column_means(&self) -> DVector<f64> {
        column_means(&self.0)
    }

    /// Copy of the rows in `range`, e.g. for a train/test split.
    pub fn rows(&self, start: usize, count: usize) -> Result<DataMatrix> {
        DataMatrix::new(self.0.rows(start, count).into_owned())
    }
}

impl TryFrom<DMatrix<f64>> for DataMatrix {
    type Error = Error;

    fn try_from(values: DMatrix<f64>) -> Result<Self> {
        DataMatrix::new(values)
    }
}

pub(crate) fn column_means(m: &DMatrix<f64>) -> DVector<f64> {
    let n = m.nrows() as f64;
    DVector::from_iterator(m.ncols(), m.column_iter().map(|c| c.sum() / n))
}

/// Subtracts `mean` from every row.
pub(crate) fn center(m: &DMatrix<f64>, mean: &DVector<f64>) -> DMatrix<f64> {
    let mut out = m.clone();
    for (j, mut col) in out.column_iter_mut().enumerate() {
        col.add_scalar_mut(-mean[j]);
    }
    out
}
