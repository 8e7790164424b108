use std::path::PathBuf;

use ctfam_syntax::ParseError;

#[derive(Debug, thiserror::Error)]
pub enum TransformError {
    #[error("{path}: {source}")]
    Parse { path: String, source: ParseError },
    #[error("no fresh identifier found after {0} attempts")]
    NameCollision(usize),
    #[error("invalid pass configuration: {0}")]
    InvalidConfig(String),
    #[error("pass produced unparseable output for {path}: {source}")]
    Invalid { path: String, source: ParseError },
}

#[derive(Debug, thiserror::Error)]
pub enum FamilyError {
    #[error(transparent)]
    Transform(#[from] TransformError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("manifest {path}: {message}")]
    Manifest { path: PathBuf, message: String },
    #[error("invalid exclude pattern {pattern:?}: {message}")]
    Pattern { pattern: String, message: String },
    #[error("{0}")]
    Chain(String),
}

pub(crate) fn io_err(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> FamilyError {
    let path = path.into();
    move |source| FamilyError::Io { path, source }
}

#[derive(Debug, thiserror::Error)]
pub enum VerifyError {
    #[error("invalid golden specification: {0}")]
    Golden(String),
    #[error("could not build worker pool: {0}")]
    Pool(String),
    #[error(transparent)]
    Family(#[from] FamilyError),
}

#[derive(Debug, thiserror::Error)]
pub enum AnalyticsError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("line {line}: {message}")]
    Schema { line: usize, message: String },
    #[error("model ranking needs at least 2 models, found {0}")]
    TooFewModels(usize),
}
