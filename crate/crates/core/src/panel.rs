//! Panel containers shared by every stage of the pipeline.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// T x N matrix of excess returns. Column `i` is the time series of asset `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReturnPanel {
    pub returns: DMatrix<f64>,
    pub assets: Vec<String>,
    pub dates: Vec<String>,
}

impl ReturnPanel {
    /// Wraps a matrix with generated labels (`a1`, `a2`, ...; periods `1..=T`).
    pub fn from_matrix(returns: DMatrix<f64>) -> Self {
        let assets = (1..=returns.ncols()).map(|i| format!("a{i}")).collect();
        let dates = (1..=returns.nrows()).map(|t| t.to_string()).collect();
        Self {
            returns,
            assets,
            dates,
        }
    }

    pub fn new(returns: DMatrix<f64>, assets: Vec<String>, dates: Vec<String>) -> Result<Self> {
        if assets.len() != returns.ncols() || dates.len() != returns.nrows() {
            return Err(Error::Dimension(format!(
                "panel is {}x{} but has {} asset labels and {} dates",
                returns.nrows(),
                returns.ncols(),
                assets.len(),
                dates.len()
            )));
        }
        Ok(Self {
            returns,
            assets,
            dates,
        })
    }

    pub fn periods(&self) -> usize {
        self.returns.nrows()
    }

    pub fn assets_count(&self) -> usize {
        self.returns.ncols()
    }
}

/// T x d matrix of observed factors.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorSeries {
    pub values: DMatrix<f64>,
    pub names: Vec<String>,
}

impl FactorSeries {
    pub fn from_matrix(values: DMatrix<f64>) -> Self {
        let names = (1..=values.ncols()).map(|j| format!("f{j}")).collect();
        Self { values, names }
    }

    /// A series with no factors (d = 0) over `periods` observations.
    pub fn empty(periods: usize) -> Self {
        Self {
            values: DMatrix::zeros(periods, 0),
            names: Vec::new(),
        }
    }

    pub fn periods(&self) -> usize {
        self.values.nrows()
    }

    pub fn count(&self) -> usize {
        self.values.ncols()
    }
}
