use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] periso_core::Error),
    #[error("symmetry validation failed for `{family}`: worst violation {violation:e}")]
    Symmetry { family: String, violation: f64 },
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl CliError {
    /// Process exit code: 1 for failed checks, 2 for anything that stops the
    /// experiment from running at all.
    pub fn exit_code(&self) -> u8 {
        match self {
            Self::Symmetry { .. } => 1,
            _ => 2,
        }
    }
}
