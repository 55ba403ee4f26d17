use thiserror::Error;

/// Errors produced by the compression toolkit.
#[derive(Debug, Error)]
pub enum SlimError {
    #[error("tensor has no elements")]
    EmptyTensor,
    #[error("rank {rank} out of range 1..={max}")]
    RankOutOfRange { rank: usize, max: usize },
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("quantization scale must be positive and finite, got {0}")]
    NonPositiveAlpha(f32),
    #[error("unsupported bitwidth {0} (expected 2..=8)")]
    UnsupportedBitwidth(u32),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("dimension {dim} is not divisible by group length {m}")]
    IndivisibleDimension { dim: usize, m: usize },
    #[error("invalid sparsity pattern: {0}")]
    InvalidPattern(String),
    #[error("calibration statistics are empty")]
    EmptyStats,
    #[error("saliency vector has a non-positive entry at {0}")]
    NonPositiveSaliency(usize),
    #[error("invalid configuration: {0}")]
    ConfigInvalid(String),
    #[error("no input rows supplied")]
    EmptyInput,
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("bad magic bytes")]
    BadMagic,
    #[error("unsupported container version {0}")]
    UnsupportedVersion(u32),
    #[error("corrupt header: {0}")]
    CorruptHeader(String),
    #[error("truncated data")]
    TruncatedData,
    #[error("schema violation: {0}")]
    SchemaViolation(String),
}

pub type Result<T> = std::result::Result<T, SlimError>;
