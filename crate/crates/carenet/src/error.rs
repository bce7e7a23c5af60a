//! Error type shared across the pipeline.

use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A flag or config value is outside its allowed range.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("cannot open {path}: {source}")]
    File {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error("{0}")]
    Io(#[from] std::io::Error),

    #[error("{0}")]
    Csv(#[from] csv::Error),

    /// The input header is missing a required column.
    #[error("missing required column `{0}`")]
    MissingColumn(String),

    /// A malformed input row; `line` is 1-based and counts the header.
    #[error("line {line}: {message}")]
    Row { line: u64, message: String },

    #[error("no events")]
    NoEvents,

    #[error("degenerate matrix: {0}")]
    DegenerateMatrix(String),

    #[error("SVD did not converge after {iterations} iterations (last residual {residual:.3e})")]
    SvdNoConvergence { iterations: usize, residual: f64 },

    #[error("insufficient distinct points: {distinct} distinct point(s) for k = {k}")]
    InsufficientPoints { distinct: usize, k: usize },

    #[error("degenerate group {group}: {size} patient(s)")]
    DegenerateGroup { group: usize, size: usize },

    #[error("empty group {0}")]
    EmptyGroup(usize),

    #[error("graph has no edges")]
    NoEdges,

    #[error("no connected node pairs")]
    NoPaths,

    #[error("collinear columns: {}", .0.join(", "))]
    CollinearColumns(Vec<String>),

    #[error("zero variance in correlation input")]
    ZeroVariance,

    #[error("unknown factor `{0}`")]
    UnknownFactor(String),

    #[error("label vectors differ in length: {0} vs {1}")]
    LabelLengthMismatch(usize, usize),

    /// A pipeline artifact exists but cannot be parsed.
    #[error("cannot parse {path}: {message}")]
    Artifact { path: PathBuf, message: String },

    #[error("no patients remain after cohort filters")]
    EmptyCohort,

    /// An iterative fit other than the SVD hit its iteration cap.
    #[error("{0} did not converge")]
    NonConvergence(String),
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    pub fn row(line: u64, message: impl Into<String>) -> Self {
        Error::Row {
            line,
            message: message.into(),
        }
    }
}
