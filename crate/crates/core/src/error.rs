use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("non-finite input {0}")]
    NonFiniteInput(f64),
    #[error("stepping overflowed to a non-finite value")]
    Overflow,
    #[error("interval divisor [{lo}, {hi}] spans zero")]
    DivisorSpansZero { lo: f64, hi: f64 },
    #[error("square root of an interval with negative lower bound {0}")]
    NegativeOperand(f64),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("current and target labels are both {0}")]
    SameLabels(usize),
    #[error("label {label} out of range for {classes} classes")]
    LabelOutOfRange { label: usize, classes: usize },
    #[error("input is classified as {got}, expected {expected}")]
    LabelMismatch { expected: usize, got: usize },
    #[error("weight norm is zero")]
    ZeroWeightNorm,
    #[error("perturbation direction has zero norm")]
    ZeroDirection,
    #[error("invalid bracket [{lo}, {hi}]")]
    InvalidBracket { lo: f64, hi: f64 },
    #[error("argument outside its domain: {0}")]
    DomainError(String),
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("degenerate training data: {0}")]
    DegenerateData(String),
    #[error("bad IDX magic {found} (expected {expected})")]
    BadMagic { expected: u32, found: u32 },
    #[error("truncated file {0}")]
    TruncatedFile(PathBuf),
    #[error("{images} images but {labels} labels")]
    CountMismatch { images: usize, labels: usize },
    #[error("model schema error: {0}")]
    SchemaError(String),
    #[error("decimal rendering {decimal} disagrees with bit pattern {hex}")]
    BitPatternMismatch { hex: String, decimal: f64 },
    #[error("csv error: {0}")]
    Csv(String),
    #[error("internal invariant violated: {0}")]
    Invariant(String),
    #[error("io error on {path}: {message}")]
    Io { path: PathBuf, message: String },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, err: std::io::Error) -> Error {
        Error::Io { path: path.into(), message: err.to_string() }
    }
}
