use std::fmt;

use tabsynth::Error;

/// Failure classes, distinguished by exit code.
#[derive(Debug)]
pub enum CliError {
    /// Bad config, flags or inputs; exit code 2.
    Config(String),
    /// Failure while running; exit code 3.
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Runtime(_) => 3,
        }
    }

    /// Wraps a library error with the failing step.
    pub fn from_lib(context: &str, e: Error) -> Self {
        let msg = format!("{context}: {e}");
        match e {
            Error::InvalidSchema(_)
            | Error::InvalidConfig(_)
            | Error::InvalidPrivacySpec(_)
            | Error::InvalidAttackConfig(_)
            | Error::UnknownColumn(_)
            | Error::MissingHeader(_)
            | Error::UnparsableCell { .. }
            | Error::MissingNotAllowed { .. }
            | Error::MissingTarget { .. }
            | Error::RowArity { .. }
            | Error::CheckpointVersion(_)
            | Error::SchemaMismatch(_)
            | Error::Io { .. }
            | Error::Csv(_)
            | Error::Json(_) => CliError::Config(msg),
            _ => CliError::Runtime(msg),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Runtime(m) => write!(f, "runtime error: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

/// `?`-friendly context for library results.
pub trait Context<T> {
    fn ctx(self, context: &str) -> Result<T, CliError>;
}

impl<T> Context<T> for tabsynth::Result<T> {
    fn ctx(self, context: &str) -> Result<T, CliError> {
        self.map_err(|e| CliError::from_lib(context, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_follow_error_class() {
        assert_eq!(CliError::from_lib("load", Error::InvalidSchema("x".into())).exit_code(), 2);
        assert_eq!(CliError::from_lib("train", Error::BudgetTooSmall).exit_code(), 3);
        let e = CliError::from_lib("train", Error::EmptyInput);
        assert!(e.to_string().starts_with("runtime error: train:"));
    }
}
