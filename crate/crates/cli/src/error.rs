use std::fmt;

/// Failure of a CLI command, split by exit code.
#[derive(Debug, Clone, PartialEq)]
pub enum CliError {
    /// Malformed input, configuration or files. Exit code 2.
    Input(String),
    /// The numerics failed on valid input. Exit code 3.
    Numerical(String),
}

impl CliError {
    pub fn input(msg: impl Into<String>) -> Self {
        CliError::Input(msg.into())
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            CliError::Input(m) | CliError::Numerical(m) => m,
        }
    }

    /// Single JSON line for standard error.
    pub fn machine_line(&self) -> String {
        let kind = match self {
            CliError::Input(_) => "input",
            CliError::Numerical(_) => "numerical",
        };
        serde_json::json!({
            "error": kind,
            "code": self.exit_code(),
            "message": self.message(),
        })
        .to_string()
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.message())
    }
}

impl std::error::Error for CliError {}

impl From<caviar_core::Error> for CliError {
    fn from(e: caviar_core::Error) -> Self {
        if e.is_numerical() {
            CliError::Numerical(e.to_string())
        } else {
            CliError::Input(e.to_string())
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Input(format!("i/o error: {e}"))
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Input(format!("csv error: {e}"))
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
