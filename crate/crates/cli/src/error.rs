use std::fmt;

/// Exit status 1 for usage and configuration problems, 2 for data failures.
#[derive(Debug)]
pub enum CliError {
    Usage(anyhow::Error),
    Data(anyhow::Error),
}

impl CliError {
    pub fn usage(msg: impl fmt::Display) -> Self {
        CliError::Usage(anyhow::anyhow!("{msg}"))
    }

    pub fn data(msg: impl fmt::Display) -> Self {
        CliError::Data(anyhow::anyhow!("{msg}"))
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(e) | CliError::Data(e) => write!(f, "{e:#}"),
        }
    }
}

pub trait UsageContext<T> {
    fn usage(self) -> Result<T, CliError>;
    fn data(self) -> Result<T, CliError>;
}

impl<T> UsageContext<T> for anyhow::Result<T> {
    fn usage(self) -> Result<T, CliError> {
        self.map_err(CliError::Usage)
    }

    fn data(self) -> Result<T, CliError> {
        self.map_err(CliError::Data)
    }
}
