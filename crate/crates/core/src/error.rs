use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("density {value} outside flux domain [{lo}, {hi}]")]
    Domain { value: f64, lo: f64, hi: f64 },

    #[error("flux level {value} outside [0, {max}]")]
    Range { value: f64, max: f64 },

    #[error("invalid flux: {0}")]
    InvalidFlux(String),

    #[error("invalid signal: {0}")]
    InvalidSignal(String),

    #[error("invalid germ parameters: {0}")]
    InvalidGerm(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("time step {dt} exceeds the CFL limit {limit}")]
    Cfl { dt: f64, limit: f64 },

    #[error("scenario: {0}")]
    Scenario(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn pre(msg: impl Into<String>) -> Self {
        Error::Precondition(msg.into())
    }
}
