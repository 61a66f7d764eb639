//! Error taxonomy shared by every module in the crate.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Caller-supplied values violate a documented precondition.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Smallest eigenvalue falls below the p.s.d. clamping threshold.
    #[error("matrix is not positive semi-definite (smallest eigenvalue {min_eigenvalue:e})")]
    NotPositiveSemiDefinite { min_eigenvalue: f64 },

    /// Penalty value outside the estimator's legal domain.
    #[error("penalty {lambda} lies outside the {estimator} domain {domain}")]
    PenaltyOutOfDomain {
        lambda: f64,
        estimator: &'static str,
        domain: &'static str,
    },

    /// A data-driven target cannot be formed from this input.
    #[error("singular target: {0}")]
    SingularTarget(String),

    /// The estimator requires a positive definite target and got none.
    #[error("target matrix is not positive definite")]
    TargetNotPD,

    /// An internal numeric routine left its validated envelope.
    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    /// Inversion refused: smallest/largest eigenvalue ratio at or below 1e-14.
    #[error("matrix is numerically singular (eigenvalue ratio {ratio:e})")]
    NearSingular { ratio: f64 },

    /// Brent ran out of its evaluation budget.
    #[error("minimization did not converge after {evaluations} evaluations (best x={best_x}, f={best_value})")]
    ConvergenceFailure {
        best_x: f64,
        best_value: f64,
        evaluations: usize,
    },

    /// Malformed cell or row in a CSV input. Line and column are 1-based.
    #[error("parse error at line {line}{}: {message}", fmt_column(.column))]
    ParseError {
        line: u64,
        column: Option<u64>,
        message: String,
    },

    /// Missing values are an error, never imputed. Location is the first hit.
    #[error("{count} missing value(s), first at line {line}, column {column}")]
    MissingData { count: usize, line: u64, column: u64 },

    /// Correlation scaling hit a zero or negative variance. Column is 1-based.
    #[error("column {column} has zero or negative variance")]
    DegenerateVariance { column: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn fmt_column(column: &Option<u64>) -> String {
    match column {
        Some(c) => format!(", column {c}"),
        None => String::new(),
    }
}
