use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid economy: {0}")]
    InvalidEconomy(String),

    #[error("malformed partition: {0}")]
    MalformedPartition(String),

    #[error("partitions over different state spaces ({0} vs {1} states)")]
    StateSpaceMismatch(usize, usize),

    #[error("nonpositive price component {value} for good {good}")]
    NonPositivePrice { good: usize, value: f64 },

    #[error("invalid price system: {0}")]
    InvalidPrices(String),

    #[error("solver did not converge in state {state}: best residual {residual:e} after {iterations} iterations")]
    NoConvergence {
        state: String,
        residual: f64,
        iterations: usize,
    },

    #[error("infeasible allocation: {0}")]
    Infeasible(String),

    #[error("invalid coalition: {0}")]
    InvalidCoalition(String),

    #[error("economy has no atoms")]
    NoAtoms,

    #[error("instance too large: {0}")]
    TooLarge(String),

    #[error("certificate failed re-verification: {0}")]
    StaleCertificate(String),

    #[error("precondition not met: {0}")]
    Precondition(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("undecided: {0}")]
    Undecided(String),
}
