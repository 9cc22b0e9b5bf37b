//! Error type shared across the crate.

use thiserror::Error;

/// Errors produced by data ingestion, model construction, and the solver.
#[derive(Debug, Error)]
pub enum Error {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("malformed csv at line {line}: {message}")]
    MalformedCsv { line: usize, message: String },

    #[error("non-positive price for {ticker} on {date}: {value}")]
    NonPositivePrice {
        ticker: String,
        date: String,
        value: f64,
    },

    #[error("too few rows: need at least {needed}, got {got}")]
    TooFewRows { needed: usize, got: usize },

    #[error("horizon {n} exceeds available return rows {rows}")]
    HorizonTooLong { n: usize, rows: usize },

    #[error("invalid support bounds: {0}")]
    InvalidBounds(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("corner enumeration cap exceeded: {dims} non-degenerate dimensions, cap {cap}")]
    CornerCapExceeded { dims: usize, cap: usize },

    #[error("non-convex cost specification: {0}")]
    NonConvexCost(String),

    #[error("costs consume account: transaction costs {tc} >= account value {v0}")]
    CostsConsumeAccount { tc: f64, v0: f64 },

    #[error("infeasible problem: {0}")]
    Infeasible(String),

    #[error("invalid config field `{field}`: {message}")]
    InvalidConfig { field: String, message: String },
}

pub type Result<T> = std::result::Result<T, Error>;
