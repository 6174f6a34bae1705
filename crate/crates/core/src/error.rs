use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("off-diagonal vector must have length 1, 2 or 4, got {0}")]
    Dimension(usize),

    #[error("quadrature did not converge: {0}")]
    NonConvergence(String),

    #[error("unreliable ratio: denominator {0:e} is below the resolvable threshold")]
    UnreliableRatio(f64),

    #[error("simulation budget exhausted after {simulated} draws ({accepted} accepted)")]
    BudgetExhausted { accepted: usize, simulated: usize },

    #[error("empty input")]
    EmptyInput,

    #[error("value overflows the floating range: {0}")]
    Overflow(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
