use thiserror::Error;

/// Errors raised anywhere in the library. Every variant has a stable short
/// code (see [`Error::code`]) that front ends embed in their own messages.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    #[error("entropy source exhausted after {consumed} bytes")]
    EntropyExhausted { consumed: u64 },

    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    #[error("rejection loop exceeded the diagnostic cap of {0} iterations")]
    LoopCapExceeded(u64),

    #[error("sample {0} does not fit in a 64-bit integer")]
    Overflow(String),

    #[error("state space exceeded {limit} states")]
    StateExplosion { limit: usize },

    #[error("support mismatch: {0}")]
    SupportMismatch(String),

    #[error("enumeration too large: {0}")]
    EnumerationTooLarge(String),

    #[error("cannot combine mechanisms from different DP systems ({0} vs {1})")]
    SystemMismatch(String, String),

    #[error("fewer than two cells remain after merging ({0})")]
    DegenerateCells(usize),

    #[error("insufficient privacy budget: requested {requested}, remaining {remaining}")]
    BudgetExhausted { requested: String, remaining: String },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    pub fn code(&self) -> &'static str {
        match self {
            Error::EntropyExhausted { .. } => "ENTROPY_EXHAUSTED",
            Error::InvalidParam(_) => "INVALID_PARAM",
            Error::LoopCapExceeded(_) => "LOOP_CAP_EXCEEDED",
            Error::Overflow(_) => "OVERFLOW",
            Error::StateExplosion { .. } => "STATE_EXPLOSION",
            Error::SupportMismatch(_) => "SUPPORT_MISMATCH",
            Error::EnumerationTooLarge(_) => "ENUMERATION_TOO_LARGE",
            Error::SystemMismatch(..) => "SYSTEM_MISMATCH",
            Error::DegenerateCells(_) => "DEGENERATE_CELLS",
            Error::BudgetExhausted { .. } => "BUDGET_EXHAUSTED",
            Error::Parse(_) => "PARSE_ERROR",
            Error::Io(_) => "IO_ERROR",
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParam(msg.into())
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
