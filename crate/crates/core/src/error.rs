use thiserror::Error;

use crate::expr::ExprError;
use crate::ode::FlowResult;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("step schedule exhausted: a({n}) requested from a table of {len} entries")]
    ScheduleExhausted { n: usize, len: usize },

    #[error("numeric overflow: {0}")]
    NumericOverflow(String),

    #[error("invalid region: {0}")]
    InvalidRegion(String),

    #[error("empty region: no sample landed in {what} after {attempts} draws")]
    EmptyRegion { what: String, attempts: usize },

    #[error("integration failed at t = {t}: {reason}")]
    IntegrationFailure {
        t: f64,
        reason: String,
        partial: Box<FlowResult>,
    },

    #[error("incomplete trace: {0}")]
    IncompleteTrace(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("unknown problem `{0}`")]
    UnknownProblem(String),

    #[error("config error at `{key}`: {message}")]
    Config { key: String, message: String },

    #[error(transparent)]
    Expr(#[from] ExprError),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            message: message.into(),
        }
    }
}
