use std::path::PathBuf;

use thiserror::Error;

use crate::models::svm::SvmModel;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed input: {0}")]
    Format(String),

    #[error("unsupported encoding: {0}")]
    Unsupported(String),

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("parse error on line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("out of range: {0}")]
    Range(String),

    #[error("internal error: {0}")]
    Internal(String),

    #[error("degenerate training data: {0}")]
    DegenerateData(String),

    #[error("singular matrix: {0}")]
    SingularMatrix(String),

    /// The solver hit its iteration cap; `best` is the last iterate.
    #[error("no convergence after {iterations} iterations (max KKT violation {violation:.3e})")]
    Convergence {
        iterations: usize,
        violation: f64,
        best: Box<SvmModel>,
    },

    #[error("architecture mismatch: {0}")]
    Architecture(String),

    #[error("hyperparameter search failed: {0}")]
    Search(String),

    #[error("missing inputs: {}", .0.iter().map(|p| p.display().to_string()).collect::<Vec<_>>().join(", "))]
    MissingFiles(Vec<PathBuf>),

    #[error("io error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    /// Short machine-readable tag, used in the CLI error summary.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Format(_) => "format",
            Error::Unsupported(_) => "unsupported",
            Error::EmptyInput(_) => "empty_input",
            Error::Argument(_) => "argument",
            Error::Parse { .. } => "parse",
            Error::Range(_) => "range",
            Error::Internal(_) => "internal",
            Error::DegenerateData(_) => "degenerate_data",
            Error::SingularMatrix(_) => "singular_matrix",
            Error::Convergence { .. } => "convergence",
            Error::Architecture(_) => "architecture",
            Error::Search(_) => "search",
            Error::MissingFiles(_) => "missing_files",
            Error::Io { .. } => "io",
            Error::Csv(_) => "csv",
            Error::Json(_) => "json",
        }
    }
}
