use thiserror::Error;

/// Errors raised while building problems, configuring runs, or iterating.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid configuration: {field}: {reason}")]
    Config { field: String, reason: String },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    Dimension { expected: usize, actual: usize },

    #[error(
        "reference solve did not converge within {iterations} iterations \
         (last fixed-point residual {residual:e})"
    )]
    Unconverged { iterations: usize, residual: f64 },

    #[error("iteration diverged at k = {iteration}: |x| = {x_norm:e}, |y| = {y_norm:e}, |z| = {z_norm:e}")]
    Diverged {
        iteration: usize,
        x_norm: f64,
        y_norm: f64,
        z_norm: f64,
    },

    #[error("regularizer is infinite at {point}")]
    OutsideDomain { point: String },
}

impl Error {
    pub(crate) fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            reason: reason.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
