use thiserror::Error;

use crate::qalg::ValidityReport;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },

    #[error("factor dimensions {factors:?} do not multiply to {dim}")]
    BadFactorization { factors: Vec<usize>, dim: usize },

    #[error("site {site} out of range for {sites} tensor factors")]
    SiteOutOfRange { site: usize, sites: usize },

    #[error("cannot trace out the only remaining factor")]
    TraceOfLastFactor,

    #[error("not a valid density operator: {0}")]
    InvalidDensity(ValidityReport),

    #[error("invalid POVM: {0}")]
    InvalidPovm(String),

    #[error("invalid Kraus channel: {0}")]
    InvalidChannel(String),

    #[error("unknown POVM kind `{0}`")]
    UnknownPovmKind(String),

    #[error("outcome {outcome} out of range ({outcomes} outcomes)")]
    OutcomeOutOfRange { outcome: usize, outcomes: usize },

    /// Born probability of the requested outcome is at or below the floor,
    /// so the post-measurement state is undefined.
    #[error("outcome {outcome} has probability {probability:e}, below the zero-probability floor")]
    ZeroProbabilityOutcome { outcome: usize, probability: f64 },

    /// The prior assigns no weight to the observed data.
    #[error("prior excludes outcome {outcome} (total evidence {evidence:e})")]
    ZeroEvidence { outcome: usize, evidence: f64 },

    #[error("dense dimension {dim} exceeds the cap of {cap}")]
    DenseCapExceeded { dim: usize, cap: usize },

    #[error("measurement not supported by this prior: {0}")]
    UnsupportedMeasurement(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// A sequential run hit [`Error::ZeroEvidence`] (or the dense equivalent)
    /// at the given 1-based iteration.
    #[error("inference aborted at iteration {iteration}: {source}")]
    Aborted {
        iteration: usize,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    /// True for the two "data excluded by the prior" variants, including
    /// when wrapped in [`Error::Aborted`].
    pub fn is_zero_evidence(&self) -> bool {
        match self {
            Error::ZeroEvidence { .. } | Error::ZeroProbabilityOutcome { .. } => true,
            Error::Aborted { source, .. } => source.is_zero_evidence(),
            _ => false,
        }
    }
}
