use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("inner {size}x{size} Woodbury matrix is singular (gamma too large relative to B?)")]
    SingularInnerMatrix { size: usize },

    #[error("matrix is not positive definite (pivot {pivot} at row {row})")]
    NotPositiveDefinite { row: usize, pivot: f64 },

    #[error("matrix is not symmetric: |M[{row},{col}] - M[{col},{row}]| = {diff:e}")]
    AsymmetricInput { row: usize, col: usize, diff: f64 },

    #[error("non-finite feature value at row {row}, column {col}")]
    NonFiniteFeature { row: usize, col: usize },

    #[error("dense similarity refused for n = {n} (limit {limit}): unacceptable memory demand")]
    DenseMemoryGuard { n: usize, limit: usize },

    #[error("k = {k} exceeds the number of points n = {n}")]
    KExceedsN { k: usize, n: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("labeled view inconsistent with labels: {0}")]
    InconsistentView(String),

    #[error("test set is empty")]
    EmptyTestSet,

    #[error("too few points: {0}")]
    TooFewPoints(String),

    #[error("insufficient labels: {0}")]
    InsufficientLabels(String),

    #[error("file not found: {}", .0.display())]
    FileNotFound(PathBuf),

    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),

    #[error("parse error at row {row}, column `{column}`: {message}")]
    ParseError {
        row: usize,
        column: String,
        message: String,
    },

    #[error("config error: {0}")]
    Config(String),

    #[error("report error: {0}")]
    Report(String),

    #[error("repetition {index} failed: {source}")]
    Repetition {
        index: usize,
        #[source]
        source: Box<Error>,
        partial: Box<crate::experiment::RunReport>,
    },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Stable identifier used in machine-readable error output.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::DimensionMismatch(_) => "DimensionMismatch",
            Error::SingularInnerMatrix { .. } => "SingularInnerMatrix",
            Error::NotPositiveDefinite { .. } => "NotPositiveDefinite",
            Error::AsymmetricInput { .. } => "AsymmetricInput",
            Error::NonFiniteFeature { .. } => "NonFiniteFeature",
            Error::DenseMemoryGuard { .. } => "DenseMemoryGuard",
            Error::KExceedsN { .. } => "KExceedsN",
            Error::InvalidParameter(_) => "InvalidParameter",
            Error::InconsistentView(_) => "InconsistentView",
            Error::EmptyTestSet => "EmptyTestSet",
            Error::TooFewPoints(_) => "TooFewPoints",
            Error::InsufficientLabels(_) => "InsufficientLabels",
            Error::FileNotFound(_) => "FileNotFound",
            Error::SchemaMismatch(_) => "SchemaMismatch",
            Error::ParseError { .. } => "ParseError",
            Error::Config(_) => "ConfigError",
            Error::Report(_) => "ReportError",
            Error::Repetition { source, .. } => source.kind(),
            Error::Io(_) => "IoError",
            Error::Csv(_) => "IoError",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
