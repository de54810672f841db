use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad command line or unreadable input.
    #[error("{0}")]
    Usage(String),

    /// Scenario file does not match the schema.
    #[error("invalid scenario: {0}")]
    Config(String),

    /// An asserted verifier failed or a hypothesis was violated.
    #[error("{0}")]
    Verification(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Core(#[from] hj_singular::Error),
}

impl CliError {
    /// 1 for mathematical failures, 2 for usage and configuration errors.
    pub fn exit_code(&self) -> i32 {
        use hj_singular::Error as E;
        match self {
            CliError::Verification(_) => 1,
            CliError::Core(E::InvalidInput(_) | E::Expression(_) | E::NotSpd(_) | E::Io(_) | E::OutsideRegion(_)) => 2,
            CliError::Core(_) => 1,
            CliError::Usage(_) | CliError::Config(_) | CliError::Io(_) => 2,
        }
    }
}
