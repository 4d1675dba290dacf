use thiserror::Error;

#[derive(Debug, Error)]
pub enum SimError {
    /// Bad scenario, override or argument; reported before a run starts.
    #[error("config error: {0}")]
    Config(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Plan(#[from] ras_core::PlanError),
}

pub type SimResult<T> = Result<T, SimError>;
