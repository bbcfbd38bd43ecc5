use thiserror::Error;

/// Errors raised by the separation toolkit.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("not causal: AR polynomial has a root on or inside the unit circle (spectral radius {0:.6})")]
    NotCausal(f64),

    #[error("truncation overflow: tail mass still above tolerance after {0} terms")]
    TruncationOverflow(usize),

    #[error("invalid source spec: {0}")]
    InvalidSpec(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("lag {lag} out of range for series of length {len}")]
    LagOutOfRange { lag: usize, len: usize },

    #[error("duplicate lag {0}")]
    DuplicateLag(usize),

    #[error("not positive definite: smallest eigenvalue {min:.3e}, largest {max:.3e}")]
    NotPositiveDefinite { min: f64, max: f64 },

    #[error("degenerate temporal structure: criterion matrix is singular")]
    DegenerateTemporalStructure,

    #[error("horizon too small: need kmax >= {required}, got {given}")]
    HorizonTooSmall { required: usize, given: usize },

    #[error("identifiability failure: {0}")]
    IdentifiabilityFailure(String),

    #[error("pairwise identifiability failure: components {0} and {1} have identical autocorrelations over the lag set")]
    PairwiseIdentifiabilityFailure(usize, usize),

    #[error("rank deficient: {0}")]
    RankDeficient(String),

    #[error("singular matrix")]
    SingularMatrix,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, Error>;
