use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Matrix or vector shapes do not agree.
    #[error("dimension mismatch: {0}")]
    Structural(String),

    #[error("ILF solver failed: {0}")]
    Solver(String),

    /// No feasible multiplier triple below the search cap.
    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("gain synthesis failed: {0}")]
    Synthesis(String),

    /// Caller violated an input contract (e.g. a mismatched perturbation with a matched component).
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("invalid state: {0}")]
    State(String),

    #[error("simulation diverged at step {step} (t = {time}): {reason}")]
    Diverged { step: usize, time: f64, reason: String },

    #[error("invalid configuration: {0}")]
    Config(String),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn structural(msg: impl Into<String>) -> Self {
        Error::Structural(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}
