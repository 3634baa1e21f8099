use std::fmt;

/// Failure of a command, carrying its exit code.
#[derive(Debug)]
pub enum CliError {
    /// Some inputs could not be processed; the rest were.
    Files(Vec<String>),
    Config(String),
    Checkpoint(String),
    /// Ids present on only one side of a pairing.
    Mismatch(Vec<String>),
    Interrupted,
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Files(_) | CliError::Runtime(_) => 1,
            CliError::Config(_) => 2,
            CliError::Checkpoint(_) => 3,
            CliError::Mismatch(_) => 4,
            CliError::Interrupted => 130,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Files(list) => write!(f, "{} file(s) failed:\n  {}", list.len(), list.join("\n  ")),
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Checkpoint(m) => write!(f, "checkpoint error: {m}"),
            CliError::Mismatch(ids) => write!(f, "unmatched ids:\n  {}", ids.join("\n  ")),
            CliError::Interrupted => write!(f, "interrupted; final checkpoint written"),
            CliError::Runtime(m) => write!(f, "{m}"),
        }
    }
}

impl From<vesselforge::Error> for CliError {
    fn from(e: vesselforge::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}
