use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("step distribution is not a lattice law: {0}")]
    NonLattice(String),

    #[error("lattice window too large: {needed} cells exceeds the limit of {limit}")]
    WindowOverflow { needed: u128, limit: u128 },

    #[error(
        "fixed-point iteration did not converge after {sweeps} sweeps (residual {residual:e})"
    )]
    NonConvergence { sweeps: usize, residual: f64 },

    #[error("acceptance underflow: {accepted} accepted out of {attempts} attempts; {hint}")]
    Underflow {
        accepted: usize,
        attempts: u64,
        hint: String,
    },

    #[error("all particles died before level {level}")]
    Extinction { level: usize },

    #[error("end point is not reachable: {0}")]
    Unreachable(String),

    #[error("path left the harmonic table window at {0:?}")]
    WindowExhausted(Vec<i64>),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    /// True for errors caused by bad user input rather than by a failed
    /// computation.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::InvalidInput(_)
                | Error::Unsupported(_)
                | Error::NonLattice(_)
                | Error::Parse(_)
                | Error::Unreachable(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
