use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Design matrix (one row per observation) and response vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    x: DMatrix<f64>,
    y: DVector<f64>,
    names: Vec<String>,
}

impl Dataset {
    /// Builds a dataset, checking shapes, finiteness and n ≥ k + 1.
    /// Column rank is checked later, when a fit factorizes the design.
    pub fn new(x: DMatrix<f64>, y: DVector<f64>) -> Result<Self> {
        let names = (0..x.ncols()).map(|j| format!("x{j}")).collect();
        Self::with_names(x, y, names)
    }

    pub fn with_names(x: DMatrix<f64>, y: DVector<f64>, names: Vec<String>) -> Result<Self> {
        let (n, k) = x.shape();
        if y.len() != n {
            return Err(Error::InvalidInput(format!(
                "design has {n} rows but response has {} entries",
                y.len()
            )));
        }
        if names.len() != k {
            return Err(Error::InvalidInput(format!("{} column names for {k} columns", names.len())));
        }
        if k == 0 {
            return Err(Error::InvalidInput("design matrix has no columns".into()));
        }
        if n < k + 1 {
            return Err(Error::InvalidInput(format!("need at least k + 1 = {} observations, got {n}", k + 1)));
        }
        if x.iter().chain(y.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("dataset contains non-finite values".into()));
        }
        Ok(Self { x, y, names })
    }

    /// Prepends a column of ones named "intercept".
    pub fn with_intercept(self) -> Result<Self> {
        let x = self.x.insert_column(0, 1.0);
        let mut names = Vec::with_capacity(self.names.len() + 1);
        names.push("intercept".to_string());
        names.extend(self.names);
        Self::with_names(x, self.y, names)
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn y(&self) -> &DVector<f64> {
        &self.y
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn k(&self) -> usize {
        self.x.ncols()
    }

    pub fn residuals(&self, beta: &DVector<f64>) -> DVector<f64> {
        &self.y - &self.x * beta
    }

    /// Copy with the response shifted by X·c.
    pub fn shifted(&self, c: &DVector<f64>) -> Self {
        Self { x: self.x.clone(), y: &self.y + &self.x * c, names: self.names.clone() }
    }
}
