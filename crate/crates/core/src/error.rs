use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("point lies outside the domain of `{label}`")]
    OutOfDomain { label: String },

    #[error("jet order {order} is too high for numerical differentiation (max 3)")]
    OrderTooHigh { order: usize },

    #[error("no positive radius r with B(x0, 2r) inside the bound region")]
    DomainTooSmall,

    #[error("existence guard violated: {detail}")]
    GuardViolated { detail: String },

    #[error("trajectory left the region at t = {t}")]
    LeftDomain { t: f64 },

    #[error("step size underflow at t = {t} (h = {h:e})")]
    StepUnderflow { t: f64, h: f64 },

    #[error("tail bound {tail:e} cannot be pushed below tolerance {tol:e} at any truncation")]
    TailNotSummable { tail: f64, tol: f64 },

    #[error("flow word is not integrable: {detail}")]
    WordNotIntegrable { detail: String },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("index {index} is outside the family (size {size})")]
    IndexOutOfFamily { index: usize, size: usize },

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("unknown builtin `{0}`")]
    UnknownBuiltin(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl Error {
    /// Stable variant name, used in reports.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::OutOfDomain { .. } => "OutOfDomain",
            Error::OrderTooHigh { .. } => "OrderTooHigh",
            Error::DomainTooSmall => "DomainTooSmall",
            Error::GuardViolated { .. } => "GuardViolated",
            Error::LeftDomain { .. } => "LeftDomain",
            Error::StepUnderflow { .. } => "StepUnderflow",
            Error::TailNotSummable { .. } => "TailNotSummable",
            Error::WordNotIntegrable { .. } => "WordNotIntegrable",
            Error::DimensionMismatch { .. } => "DimensionMismatch",
            Error::IndexOutOfFamily { .. } => "IndexOutOfFamily",
            Error::Parse { .. } => "ParseError",
            Error::UnknownBuiltin(_) => "UnknownBuiltin",
            Error::InvalidArgument(_) => "InvalidArgument",
            Error::Io(_) => "Io",
        }
    }
}
