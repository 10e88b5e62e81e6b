use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Failure categories shared by every module. The CLI maps each variant to a
/// distinct exit code through [`Error::category`].
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("malformed data: {0}")]
    Format(String),
    #[error("protocol violation: {0}")]
    Protocol(String),
    #[error("rank-deficient geometry: {0}")]
    RankDeficient(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn category(&self) -> &'static str {
        match self {
            Error::Parameter(_) => "parameter",
            Error::Format(_) => "format",
            Error::Protocol(_) => "protocol",
            Error::RankDeficient(_) => "rank",
            Error::Io(_) => "io",
        }
    }
}

macro_rules! ensure_param {
    ($cond:expr, $($arg:tt)+) => {
        // Negated so that NaN operands fail the check.
        #[allow(clippy::neg_cmp_op_on_partial_ord)]
        if !($cond) {
            return Err($crate::error::Error::Parameter(format!($($arg)+)));
        }
    };
}
pub(crate) use ensure_param;
