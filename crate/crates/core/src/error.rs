use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Every failure the engine can report.
///
/// Variants are grouped by the pipeline stage that raises them. The CLI maps
/// them onto exit codes through [`Error::class`] and reports [`Error::kind`]
/// as a machine-readable tag.
#[derive(Debug, Error)]
pub enum Error {
    // corpus
    #[error("malformed manifest record on line {line}: {reason}")]
    MalformedRecord { line: usize, reason: String },
    #[error("duplicate sample id {0:?}")]
    DuplicateId(String),
    #[error("manifest contains no records")]
    EmptyManifest,
    #[error("unknown sample id {0:?}")]
    UnknownId(String),
    #[error("cannot read input {path}: {reason}")]
    MalformedInput { path: PathBuf, reason: String },

    // text index
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("no caption produced any token")]
    NoTokens,
    #[error("unsupported index format version {found} (expected {expected})")]
    VersionMismatch { found: u64, expected: u64 },
    #[error("corrupt index: {0}")]
    CorruptIndex(String),

    // retrieval
    #[error("index is empty")]
    EmptyIndex,
    #[error("invalid cutoff: {0}")]
    InvalidCutoff(String),

    // image features
    #[error("cannot decode image {path}: {reason}")]
    DecodeError { path: PathBuf, reason: String },
    #[error("unsupported image format: {0}")]
    UnsupportedFormat(PathBuf),
    #[error("vector for {id:?} has dimension {got}, expected {expected}")]
    DimMismatch { id: String, expected: usize, got: usize },
    #[error("vector for {0:?} contains NaN or infinite components")]
    NonFiniteVector(String),
    #[error("vector for {0:?} is all zeros")]
    ZeroEmbedding(String),
    #[error("missing or invalid sidecar header: {0}")]
    MissingHeader(String),
    #[error("vector lengths differ: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("cosine of a zero vector is undefined")]
    ZeroVector,

    // influence
    #[error("kernel sum {sum:e} is too small to normalise; no candidate is visually related")]
    DegenerateKernelSum { sum: f64 },
    #[error("combine weight {0} is outside [0, 1]")]
    WeightOutOfRange(f64),
    #[error("retrieval selected no candidates for prompt {prompt:?}")]
    EmptyRetrieval { prompt: String },
    #[error("no embedding for sample {0:?}")]
    MissingEmbedding(String),
    #[error("fraction {0} is outside (0, 1]")]
    InvalidFraction(f64),

    // unlearning evaluation
    #[error("no caption in the corpus can be mutated by any rule")]
    InsufficientMutableCaptions,
    #[error("no outputs to compare")]
    EmptyOutputs,
    #[error("resolution mismatch: {left:?} vs {right:?}")]
    ResolutionMismatch {
        left: (usize, usize),
        right: (usize, usize),
    },

    // web search
    #[error("search provider unavailable: {0}")]
    ProviderUnavailable(String),
    #[error("search provider rate limited the request")]
    RateLimited,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// Failure class, used by the CLI to pick an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    /// Bad input files, flags or configuration.
    Input,
    /// The pipeline ran but could not produce an attribution.
    Pipeline,
    /// Search provider or network failure.
    Provider,
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Error::MalformedRecord { .. } => "MalformedRecord",
            Error::DuplicateId(_) => "DuplicateId",
            Error::EmptyManifest => "EmptyManifest",
            Error::UnknownId(_) => "UnknownId",
            Error::MalformedInput { .. } => "MalformedInput",
            Error::EmptyCorpus => "EmptyCorpus",
            Error::NoTokens => "NoTokens",
            Error::VersionMismatch { .. } => "VersionMismatch",
            Error::CorruptIndex(_) => "CorruptIndex",
            Error::EmptyIndex => "EmptyIndex",
            Error::InvalidCutoff(_) => "InvalidCutoff",
            Error::DecodeError { .. } => "DecodeError",
            Error::UnsupportedFormat(_) => "UnsupportedFormat",
            Error::DimMismatch { .. } => "DimMismatch",
            Error::NonFiniteVector(_) => "NonFiniteVector",
            Error::ZeroEmbedding(_) => "ZeroEmbedding",
            Error::MissingHeader(_) => "MissingHeader",
            Error::LengthMismatch { .. } => "LengthMismatch",
            Error::ZeroVector => "ZeroVector",
            Error::DegenerateKernelSum { .. } => "DegenerateKernelSum",
            Error::WeightOutOfRange(_) => "WeightOutOfRange",
            Error::EmptyRetrieval { .. } => "EmptyRetrieval",
            Error::MissingEmbedding(_) => "MissingEmbedding",
            Error::InvalidFraction(_) => "InvalidFraction",
            Error::InsufficientMutableCaptions => "InsufficientMutableCaptions",
            Error::EmptyOutputs => "EmptyOutputs",
            Error::ResolutionMismatch { .. } => "ResolutionMismatch",
            Error::ProviderUnavailable(_) => "ProviderUnavailable",
            Error::RateLimited => "RateLimited",
            Error::InvalidConfig(_) => "InvalidConfig",
            Error::Io { .. } => "IoError",
        }
    }

    pub fn class(&self) -> ErrorClass {
        match self {
            Error::EmptyRetrieval { .. }
            | Error::DegenerateKernelSum { .. }
            | Error::MissingEmbedding(_)
            | Error::InsufficientMutableCaptions
            | Error::EmptyOutputs => ErrorClass::Pipeline,
            Error::ProviderUnavailable(_) | Error::RateLimited => ErrorClass::Provider,
            _ => ErrorClass::Input,
        }
    }
}
