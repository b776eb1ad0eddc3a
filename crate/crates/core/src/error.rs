use thiserror::Error;

/// Errors raised by the coupling toolkit.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum CoreError {
    #[error("invalid margin: {0}")]
    InvalidMargin(String),

    #[error("invalid matrix: {0}")]
    InvalidMatrix(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// `p * min(mu) + q * min(nu)` fell below 1.
    #[error("feasibility condition (H) violated: p*min(mu) + q*min(nu) = {lhs} < 1")]
    ConditionHViolation { lhs: f64 },

    /// Continuous counterpart of the condition above, after mapping both supports to [0, 1].
    #[error("continuous feasibility condition violated: min f + min g = {lhs} < 1")]
    ContinuousConditionViolation { lhs: f64 },

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("size {n} exceeds the enumeration limit {max}")]
    SizeExceeded { n: usize, max: usize },

    #[error("point ({u}, {v}) lies outside the support rectangle")]
    OutOfSupport { u: f64, v: f64 },

    #[error("invalid density: {0}")]
    InvalidDensity(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A post-condition that holds analytically was breached numerically.
    #[error("internal tolerance breach: {0}")]
    ToleranceBreach(String),
}

pub type Result<T> = std::result::Result<T, CoreError>;
