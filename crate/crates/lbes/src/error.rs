use thiserror::Error;

/// Errors produced by constructors, assembly and numerical operations.
#[derive(Debug, Error)]
pub enum Error {
    #[error("no frequencies")]
    NoFrequencies,

    #[error("frequencies must be distinct")]
    DuplicateFrequency,

    #[error("f1 not zero-mean (worst sampled mean norm {worst:.3e})")]
    NotZeroMean { worst: f64 },

    #[error("state has non-finite component")]
    NonFiniteState,

    #[error("state dimension must be at least 1")]
    EmptyState,

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("matrix is not symmetric positive definite")]
    NotSpd,

    #[error("matrix is rank deficient")]
    RankDeficient,

    #[error("invalid deltas: {0}")]
    InvalidDeltas(String),

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("epsilon too large for inversion")]
    EpsilonTooLarge,

    #[error("averaged-field mismatch")]
    AveragedFieldMismatch,

    #[error("horizon shorter than one step")]
    HorizonTooShort,

    #[error("unknown preset `{0}`, available: {1}")]
    UnknownPreset(String, String),
}
