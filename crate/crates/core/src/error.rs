use thiserror::Error;

/// Errors raised across the library.
///
/// Variants map onto three outcome classes used by the command-line front
/// end: bad input, violated model assumptions and numerical breakdown.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("time {t} outside [0, {horizon}]")]
    OutOfRange { t: f64, horizon: f64 },

    #[error("assumption violated: {quantity} = {value:e} at t = {t}")]
    Assumption {
        quantity: String,
        value: f64,
        t: f64,
    },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("non-finite {variable} at step {step}")]
    NonFinite { variable: &'static str, step: usize },

    #[error("{path}: {message}")]
    Data { path: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }

    /// True for errors caused by the caller's input or by violated
    /// assumptions, as opposed to numerical breakdown or I/O.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Invalid(_)
                | Error::OutOfRange { .. }
                | Error::Assumption { .. }
                | Error::Data { .. }
                | Error::Csv(_)
                | Error::Json(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
