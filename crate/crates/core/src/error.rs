use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("non-finite constant: {0}")]
    NonFiniteConstant(f64),

    #[error("domain error in {op}: {detail}")]
    Domain { op: &'static str, detail: String },

    #[error("non-finite objective: {0}")]
    NonFiniteObjective(f64),

    #[error("value recorded on a different tape")]
    ForeignTape,

    #[error("value recorded before the tape was last reset")]
    StaleValue,

    #[error("tape already holds a live evaluation ({0} nodes)")]
    TapeInUse(usize),

    /// A factor of the log-probability is log 0; samplers reject the proposal.
    #[error("evaluation impossible: {factor} has probability zero")]
    EvaluationImpossible { factor: String },

    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("semantics mismatch: {0}")]
    ModeMismatch(String),

    #[error("draw {index}: {source}")]
    Draw {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("divergent trajectory")]
    DivergentTrajectory,

    #[error("too many divergent steps: {divergent} of {total}")]
    TooManyDivergences { divergent: usize, total: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("usage: {0}")]
    Usage(String),

    #[error("data: {0}")]
    Data(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn domain(op: &'static str, detail: impl Into<String>) -> Self {
        Error::Domain {
            op,
            detail: detail.into(),
        }
    }

    pub(crate) fn impossible(factor: impl Into<String>) -> Self {
        Error::EvaluationImpossible {
            factor: factor.into(),
        }
    }

    /// Errors a sampler absorbs by rejecting the proposal instead of aborting.
    pub fn is_recoverable(&self) -> bool {
        match self {
            Error::EvaluationImpossible { .. }
            | Error::Numerical(_)
            | Error::NonFiniteObjective(_)
            | Error::DivergentTrajectory
            | Error::Domain { .. } => true,
            Error::Draw { source, .. } => source.is_recoverable(),
            _ => false,
        }
    }

    /// Strips draw-index annotations.
    pub fn root(&self) -> &Error {
        match self {
            Error::Draw { source, .. } => source.root(),
            e => e,
        }
    }
}
