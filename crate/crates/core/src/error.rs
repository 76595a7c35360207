use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A caller broke an operation's precondition (site out of range, bad grid, ...).
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("invalid model: {0}")]
    InvalidModel(String),

    /// The boundary block chain has more than one stationary law.
    #[error("stationary measure is not unique (null space dimension {0})")]
    NonUniqueStationary(usize),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("size limit exceeded: {0}")]
    SizeLimit(String),

    /// The generator maps a monomial of degree <= 2 outside the degree <= 2 space.
    #[error("moment hierarchy does not close: {0}")]
    NotClosed(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

macro_rules! contract {
    ($cond:expr, $($arg:tt)+) => {
        if !$cond {
            return Err($crate::Error::Contract(format!($($arg)+)));
        }
    };
}
pub(crate) use contract;
