use thiserror::Error;

/// Errors surfaced by model construction, risk evaluation, and the solvers.
#[derive(Debug, Clone, Error)]
pub enum Error {
    /// Invalid argument or precondition violation (bad probability level,
    /// mismatched sample lengths, infeasible budget, ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// A numeric routine failed to converge. The message carries the
    /// diagnostics (residual estimate, bracket endpoints, iteration count).
    #[error("numeric error: {0}")]
    Numeric(String),

    /// A named model assumption required by the requested solver does not
    /// hold for this instance.
    #[error("assumption {name} violated: {detail}")]
    Assumption { name: &'static str, detail: String },

    /// The optimization problem provably admits no optimizer.
    #[error("no optimizer exists: {0}")]
    Nonexistence(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub fn numeric(msg: impl Into<String>) -> Self {
        Error::Numeric(msg.into())
    }

    pub fn assumption(name: &'static str, detail: impl Into<String>) -> Self {
        Error::Assumption {
            name,
            detail: detail.into(),
        }
    }
}
