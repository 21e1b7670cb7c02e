use thiserror::Error;

/// Errors produced across the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("series of length {len} is too short for {needed} steps")]
    EmptyResult { len: usize, needed: usize },
    #[error("period {period} is outside [1, {length}]")]
    InvalidPeriod { period: usize, length: usize },
    #[error("AR coefficient {0} is not inside (-1, 1)")]
    UnstableCoefficient(f64),
    #[error("series length {len} is below the minimum of {min}")]
    SeriesTooShort { len: usize, min: usize },
    #[error("segment length must be at least 1")]
    InvalidSegmentLength,
    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("image is {height}x{width}, expected a square image")]
    NotSquare { height: usize, width: usize },
    #[error("embedding of dimension {embed_dim} with delay {delay} does not fit {len} steps")]
    EmbeddingTooLarge { len: usize, embed_dim: usize, delay: usize },
    #[error("window length {window} exceeds series length {len}")]
    WindowTooLong { window: usize, len: usize },
    #[error("image size {size} is not divisible by patch size {patch}")]
    IndivisiblePatch { size: usize, patch: usize },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("loss is not finite")]
    NonFiniteLoss,
    #[error("non-finite value at index {0}")]
    NonFiniteValue(usize),
    #[error("label {label} out of range for {classes} classes")]
    LabelOutOfRange { label: usize, classes: usize },
    #[error("mask selects no patches")]
    EmptyMask,
    #[error("input is empty")]
    EmptyInput,
    #[error("division by zero baseline metric")]
    DivByZero,
    #[error("arguments must be positive")]
    NonPositive,
    #[error("segment length {i}/{k} * {period} is not an integer")]
    NonIntegerSegment { i: usize, k: usize, period: usize },
    #[error("horizon needs {needed} image columns, at most {max} allowed")]
    HorizonTooLong { needed: usize, max: usize },
    #[error("unsupported combination: {0}")]
    Routing(String),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}, column {column}: cell {cell:?} is not numeric")]
    NonNumericCell { line: usize, column: usize, cell: String },
    #[error("line {line}: expected {expected} fields, found {found}")]
    InconsistentWidth { line: usize, expected: usize, found: usize },
    #[error("line {line}: label {cell:?} is not an integer")]
    LabelNotInteger { line: usize, cell: String },
    #[error("file contains no data")]
    EmptyFile,
    #[error("unsupported checkpoint version {found} (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },
    #[error("corrupt file: {0}")]
    CorruptFile(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
