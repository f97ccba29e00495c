//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("column not found: {0}")]
    ColumnNotFound(String),

    #[error("zero usable rows after dropping incomplete records")]
    NoUsableRows,

    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("split fraction {0} yields an empty part for {1} rows")]
    EmptySplit(f64, usize),

    #[error("too few rows: {rows} available, {required} required")]
    TooFewRows { rows: usize, required: usize },

    #[error("design matrix is singular; add a ridge penalty or drop collinear columns")]
    SingularDesign,

    #[error("decision space is infeasible: {0}")]
    InfeasibleSpace(String),

    #[error("grid too large: {points} evaluation points exceed the {limit} guard")]
    GridTooLarge { points: u128, limit: u128 },

    #[error("unknown method name: {0}")]
    UnknownMethod(String),

    #[error("method {0} is not defined for the {1} experiment")]
    MethodNotApplicable(String, String),

    #[error("model fit failed: {0}")]
    FitFailed(String),
}
