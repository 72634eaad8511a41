//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Malformed input file content (edge list or panel CSV).
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    /// Structurally valid input that violates a contract (unknown node
    /// token, missing panel row, non-finite value on ingest).
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A model or generator specification that cannot be fit as stated
    /// (missing focal node, gamma out of range, bad lag).
    #[error("invalid specification: {0}")]
    InvalidSpec(String),

    /// Mismatched shapes between graph, panel, or coefficient vectors.
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// The weighted normal matrix is singular (e.g. an all-zero lag column).
    #[error("singular normal matrix: {0}")]
    Singular(String),

    /// Too few positive-weight rows, or effective sample size not
    /// exceeding the number of regressors.
    #[error("underdetermined system: {0}")]
    Underdetermined(String),

    /// Non-finite values reached the solver (overflowing simulation runs).
    #[error("non-finite values: {0}")]
    NonFinite(String),

    /// Hausman test undefined: the covariance difference has no positive
    /// eigenvalues to invert. `psd_violation` is set when the difference
    /// had negative eigenvalues (variance ordering violated).
    #[error("specification test undefined: {msg}")]
    TestUndefined { psd_violation: bool, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
