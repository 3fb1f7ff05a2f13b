use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),

    #[error("unknown figure `{name}`; valid ids: {}", valid.join(", "))]
    UnknownFigure { name: String, valid: Vec<String> },

    #[error(transparent)]
    Core(#[from] covloc::Error),

    #[error("i/o error on {path}: {message}")]
    Io { path: String, message: String },

    #[error("{0}")]
    Output(String),
}

pub type CliResult<T> = std::result::Result<T, CliError>;

impl CliError {
    /// 0 success, 2 config error, 3 numerical blowup, 4 unknown figure or preset, 1 anything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::UnknownFigure { .. } => 4,
            CliError::Core(e) => match e {
                covloc::Error::Contract(_) => 2,
                covloc::Error::NumericalBlowup { .. } => 3,
                covloc::Error::UnknownPreset { .. } => 4,
                _ => 1,
            },
            CliError::Io { .. } | CliError::Output(_) => 1,
        }
    }

    /// Short machine-readable category for the error report.
    pub fn kind(&self) -> &'static str {
        match self.exit_code() {
            2 => "config",
            3 => "numerical-blowup",
            4 => "unknown-id",
            _ => "runtime",
        }
    }

    pub(crate) fn io(path: impl AsRef<std::path::Path>, e: impl std::fmt::Display) -> Self {
        CliError::Io {
            path: path.as_ref().display().to_string(),
            message: e.to_string(),
        }
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Output(e.to_string())
    }
}
