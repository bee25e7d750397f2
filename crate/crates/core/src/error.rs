use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("level r = {0} must be an odd integer >= 3")]
    InvalidLevel(i64),

    #[error("p = {p} and q = {q} must be coprime with q >= 1")]
    InvalidCable { p: i64, q: i64 },

    #[error("{what} = {value} is outside [{lo}, {hi}]")]
    OutOfRange {
        what: &'static str,
        value: i64,
        lo: i64,
        hi: i64,
    },

    #[error("precondition violated: {0}")]
    Precondition(String),

    /// A sparsity or uniqueness property of `R_m` did not hold for this input.
    #[error("structure violation: {0}")]
    Structure(String),

    #[error("matrix is singular: {0}")]
    Singular(String),

    #[error("cofactor elimination stalled with {remaining} rows left{}", zero_row.map(|r| format!(" (row {r} is identically zero)")).unwrap_or_default())]
    EliminationStalled {
        remaining: usize,
        zero_row: Option<usize>,
    },

    #[error("power iteration did not converge within {iterations} iterations (last relative change {last_change:e})")]
    NonConvergence { iterations: usize, last_change: f64 },

    #[error("growth fit needs at least {needed} records, got {got}")]
    InsufficientData { needed: usize, got: usize },

    /// An invariant that the construction guarantees was observed to fail.
    /// This always indicates a bug, never bad input.
    #[error("internal consistency failure: {0}")]
    Consistency(String),
}

impl Error {
    /// True for failures that indicate an implementation defect rather than
    /// a rejected input.
    pub fn is_internal(&self) -> bool {
        matches!(self, Error::Consistency(_))
    }

    pub(crate) fn out_of_range(what: &'static str, value: i64, lo: i64, hi: i64) -> Self {
        Error::OutOfRange {
            what,
            value,
            lo,
            hi,
        }
    }
}
