use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A configuration record failed validation.
    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// The moment generating function diverges for `t >= rate`.
    #[error("MGF undefined: t = {t} must be below rate = {rate}")]
    MgfDomain { t: f64, rate: f64 },

    #[error("insufficient samples: need at least {needed}, got {got}")]
    InsufficientSamples { needed: usize, got: usize },

    #[error("degenerate distribution: {0}")]
    Degenerate(String),

    #[error("empty distribution: every trial stalled")]
    EmptyDistribution,

    #[error("capacity exceeded: {len} items, exhaustive search supports at most {max}")]
    Capacity { len: usize, max: usize },

    #[error("internal consistency check failed: {0}")]
    Consistency(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Errors caused by user input (config or arguments) rather than the run itself.
    pub fn is_invalid_input(&self) -> bool {
        matches!(
            self,
            Error::InvalidConfig(_) | Error::InvalidArgument(_) | Error::Json(_)
        )
    }
}

pub(crate) fn invalid_arg(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}

pub(crate) fn invalid_config(msg: impl Into<String>) -> Error {
    Error::InvalidConfig(msg.into())
}
