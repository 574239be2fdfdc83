use alloc::string::String;

/// Errors produced by the core algorithms.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("{what} = {value} is outside its domain")]
    Domain { what: &'static str, value: f64 },

    #[error("non-finite value at node {node}, round {round}, local step {step}")]
    Divergence {
        node: usize,
        round: usize,
        step: usize,
    },

    #[error("matrix has no eigenvalue above the rank tolerance")]
    ZeroMatrix,

    #[error("every member of the collection is the whole space")]
    DegenerateCollection,

    #[error("matrix dimension {dim} exceeds the eigen-solver cap of {cap}")]
    SizeCap { dim: usize, cap: usize },

    #[error("linear system is inconsistent (residual {residual:e})")]
    Inconsistent { residual: f64 },

    #[error("run has no distance-to-solution telemetry; audit unsupported")]
    UnsupportedAudit,

    #[error("root finder failed: {0}")]
    NumericFailure(&'static str),
}

pub type Result<T, E = Error> = core::result::Result<T, E>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}
