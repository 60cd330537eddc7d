use std::fmt;

use thiserror::Error;

/// Structural constraint a sub-block protograph must satisfy.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Constraint {
    Shape,
    Binary,
    LocalRowCount,
    LocalCheckDegrees,
    LocalVariableDegrees,
    CouplingCheckDegrees,
    CouplingVariableDegrees,
    CouplingComplement,
}

impl fmt::Display for Constraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Constraint::Shape => "shape",
            Constraint::Binary => "binary-entries",
            Constraint::LocalRowCount => "local-row-count",
            Constraint::LocalCheckDegrees => "local-check-degrees",
            Constraint::LocalVariableDegrees => "local-variable-degrees",
            Constraint::CouplingCheckDegrees => "coupling-check-degrees",
            Constraint::CouplingVariableDegrees => "coupling-variable-degrees",
            Constraint::CouplingComplement => "coupling-complement",
        };
        f.write_str(name)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("constraint {constraint} violated: {detail}")]
    Constraint { constraint: Constraint, detail: String },

    #[error("degenerate protograph: {0}")]
    Degenerate(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("sub-block is not symmetric")]
    Asymmetric,

    #[error("no convergence after {steps} steps (last {last:?}, previous {previous:?})")]
    NonConvergence {
        steps: usize,
        last: Vec<f64>,
        previous: Vec<f64>,
    },

    #[error("predicate is not monotone: {0}")]
    NonMonotone(String),

    #[error("invalid channel: {0}")]
    Channel(String),

    #[error("state {state} in the error-reduction interval has infinite q")]
    InfiniteQ { state: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn constraint(constraint: Constraint, detail: impl Into<String>) -> Error {
    Error::Constraint {
        constraint,
        detail: detail.into(),
    }
}
