use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] besqlab::Error),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("inconclusive: {0}")]
    Inconclusive(String),
}

impl CliError {
    /// 2 config, 3 non-convergence, 4 inconclusive, 1 anything else.
    pub fn exit_code(&self) -> i32 {
        use besqlab::Error as E;
        match self {
            CliError::Config(_) => 2,
            CliError::Core(E::Domain(_) | E::Dimension(_) | E::EmptyInput) => 2,
            CliError::Core(E::NonConvergence(_) | E::UnreliableRatio(_) | E::Overflow(_)) => 3,
            CliError::Core(E::BudgetExhausted { .. }) | CliError::Inconclusive(_) => 4,
            CliError::Io(_) => 1,
        }
    }
}

pub fn config_err<T>(msg: impl Into<String>) -> Result<T, CliError> {
    Err(CliError::Config(msg.into()))
}
