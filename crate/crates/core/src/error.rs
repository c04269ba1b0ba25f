use std::io;

use thiserror::Error;

/// Errors produced by the estimators, the dual solver and dataset ingestion.
#[derive(Debug, Error)]
pub enum Error {
    #[error("residual scale is zero: all residuals are identical")]
    DegenerateScale,

    #[error("design matrix is rank deficient (|R[{column},{column}]| = {pivot:e})")]
    RankDeficient { column: usize, pivot: f64 },

    #[error("no convergence after {iterations} iterations")]
    NoConvergence { iterations: usize },

    #[error("zero is not inside the convex hull of the estimating functions")]
    HullViolation,

    #[error("no feasible starting point after {attempts} perturbations of the start")]
    InfeasibleStart { attempts: usize },

    #[error("relative efficiency undefined: OLS error norms sum to zero")]
    DivideByZero,

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("parse error at row {row}, column {column}: cannot read {value:?} as a number")]
    Parse { row: u64, column: String, value: String },

    #[error("non-finite value at row {row}, column {column}")]
    NonFiniteValue { row: u64, column: String },

    #[error("source contains no data rows")]
    EmptySource,

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// True for failures caused by the input data rather than by the numerics.
    pub fn is_data_error(&self) -> bool {
        matches!(
            self,
            Error::InvalidInput(_)
                | Error::Parse { .. }
                | Error::NonFiniteValue { .. }
                | Error::EmptySource
                | Error::Io { .. }
                | Error::Csv(_)
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
