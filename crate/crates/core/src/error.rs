use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PlanError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("time {t} outside [0, {duration}]")]
    OutOfRange { t: f64, duration: f64 },
}

pub type Result<T, E = PlanError> = std::result::Result<T, E>;

pub(crate) fn invalid(msg: impl Into<String>) -> PlanError {
    PlanError::InvalidArgument(msg.into())
}
