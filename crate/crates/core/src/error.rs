use alloc::string::String;

use crate::mixture::Outcome;

/// Errors raised by the estimation core.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GmleError {
    #[error("dimension mismatch: {what} (expected {expected}, found {found})")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("invalid parameter atom: {0}")]
    InvalidAtom(String),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid mixing distribution: {0}")]
    InvalidWeights(String),

    #[error("invalid observation set: {0}")]
    InvalidObservations(String),

    #[error("outcome {0} is outside the model support")]
    OutOfSupport(Outcome),

    #[error("invalid query: {0}")]
    InvalidQuery(String),

    #[error("outcome {outcome} has zero marginal density under the current mixing distribution")]
    ZeroMarginal { outcome: Outcome },

    #[error("non-finite likelihood entry at row {row}, atom {col}")]
    NonFiniteLikelihood { row: usize, col: usize },

    #[error("no grid atom can produce outcome {outcome}")]
    UnexplainedOutcome { outcome: Outcome },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("estimator undefined: {0}")]
    Undefined(String),

    #[error("replication {rep} of design {design}: {source}")]
    Replication {
        design: usize,
        rep: usize,
        #[source]
        source: alloc::boxed::Box<GmleError>,
    },
}

pub type Result<T, E = GmleError> = core::result::Result<T, E>;
