use std::io;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("sample count mismatch: first view has {a} rows, second view has {b}")]
    SampleMismatch { a: usize, b: usize },

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("shape mismatch: expected {expected}, found {found}")]
    ShapeMismatch { expected: String, found: String },

    #[error("non-finite value at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    #[error("invalid mixing matrices: {0}")]
    InvalidMixing(String),

    #[error("requested latent dimension {requested} exceeds the {available} available canonical directions")]
    DimTooLarge { requested: usize, available: usize },

    #[error("model covariance is not positive definite (smallest eigenvalue {min_eigenvalue:e})")]
    SingularModelCovariance { min_eigenvalue: f64 },

    #[error("invalid two-view spec: {0}")]
    InvalidSpec(String),

    #[error(
        "design matrix is rank deficient (rank {rank} of {n_variables}); use the ridge fallback"
    )]
    RankDeficient { rank: usize, n_variables: usize },

    #[error("malformed embedding line {line}: {reason}")]
    MalformedLine { line: usize, reason: String },

    #[error("embedding line {line} has dimension {found}, expected {expected}")]
    DimensionMismatch {
        line: usize,
        expected: usize,
        found: usize,
    },

    #[error("embedding file {0} contains no vectors")]
    EmptyFile(PathBuf),

    #[error("no token survived the embedding lookup ({oov_count} out of vocabulary)")]
    EmptyAfterEmbedding { oov_count: usize },

    #[error("malformed dataset row {row}: {reason}")]
    MalformedRow { row: usize, reason: String },

    #[error("dataset is missing column `{0}`")]
    MissingColumn(String),

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for failures of the numerics rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NumericalFailure(_)
                | Error::SingularModelCovariance { .. }
                | Error::RankDeficient { .. }
        )
    }
}
