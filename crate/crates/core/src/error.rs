use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("file not found: {}", .0.display())]
    FileNotFound(PathBuf),

    #[error("i/o error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("format error at line {line}: {message}")]
    Format { line: usize, message: String },

    #[error("corpus contains no usable documents")]
    EmptyCorpus,

    #[error("duplicate document id {0:?}")]
    DuplicateId(String),

    #[error("document {0:?} has no tokens after cleaning")]
    EmptyAfterCleaning(String),

    #[error("vocabulary has {distinct} distinct word(s); at least 2 are required")]
    DegenerateVocabulary { distinct: usize },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("document {0:?} has no in-vocabulary tokens")]
    NoRepresentableTokens(String),

    #[error("embedding provider failed (status {status}): {body}")]
    Provider { status: u16, body: String },

    #[error("insufficient data: need at least {needed} samples, found {found}")]
    InsufficientData { needed: usize, found: usize },

    #[error("non-finite loss at epoch {epoch}, batch {batch}")]
    NonFiniteLoss { epoch: usize, batch: usize },

    #[error("checksum mismatch for {file}")]
    ChecksumMismatch { file: String },

    #[error("unsupported model format version {0}")]
    VersionUnsupported(u32),

    #[error("missing model file {}", .0.display())]
    MissingFile(PathBuf),

    #[error("document {0:?} has no label")]
    UnlabeledDocument(String),

    #[error("class {0:?} has fewer than 2 documents")]
    ClassTooSmall(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

impl Error {
    /// Stable machine-readable name of the error variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::FileNotFound(_) => "FileNotFound",
            Error::Io { .. } => "IoError",
            Error::Format { .. } => "FormatError",
            Error::EmptyCorpus => "EmptyCorpus",
            Error::DuplicateId(_) => "DuplicateId",
            Error::EmptyAfterCleaning(_) => "EmptyAfterCleaning",
            Error::DegenerateVocabulary { .. } => "DegenerateVocabulary",
            Error::DimensionMismatch { .. } => "DimensionMismatch",
            Error::NoRepresentableTokens(_) => "NoRepresentableTokens",
            Error::Provider { .. } => "ProviderError",
            Error::InsufficientData { .. } => "InsufficientData",
            Error::NonFiniteLoss { .. } => "NonFiniteLoss",
            Error::ChecksumMismatch { .. } => "ChecksumMismatch",
            Error::VersionUnsupported(_) => "VersionUnsupported",
            Error::MissingFile(_) => "MissingFile",
            Error::UnlabeledDocument(_) => "UnlabeledDocument",
            Error::ClassTooSmall(_) => "ClassTooSmall",
            Error::InvalidArgument(_) => "InvalidArgument",
        }
    }

    /// I/O error on `path`; a missing file becomes [`Error::FileNotFound`].
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        let path = path.into();
        if source.kind() == std::io::ErrorKind::NotFound {
            Error::FileNotFound(path)
        } else {
            Error::Io { path, source }
        }
    }

    pub(crate) fn format(line: usize, message: impl Into<String>) -> Self {
        Error::Format {
            line,
            message: message.into(),
        }
    }
}
