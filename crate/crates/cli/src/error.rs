use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    /// Bad arguments, configuration or input data; exit code 2.
    Input,
    /// Anything else; exit code 1.
    Internal,
}

/// A failure tagged with the pipeline stage that raised it.
#[derive(Debug, Error)]
#[error("{stage}: {message}")]
pub struct CliError {
    pub stage: &'static str,
    pub kind: ErrorKind,
    pub message: String,
}

impl CliError {
    pub fn input(stage: &'static str, message: impl Into<String>) -> Self {
        Self { stage, kind: ErrorKind::Input, message: message.into() }
    }

    pub fn internal(stage: &'static str, message: impl Into<String>) -> Self {
        Self { stage, kind: ErrorKind::Internal, message: message.into() }
    }

    pub fn usage(message: impl Into<String>) -> Self {
        Self::input("config", message)
    }

    pub fn exit_code(&self) -> i32 {
        match self.kind {
            ErrorKind::Input => 2,
            ErrorKind::Internal => 1,
        }
    }

    /// Prefixes the message with a cell (or other) context.
    pub fn context(mut self, what: impl std::fmt::Display) -> Self {
        self.message = format!("{what}: {}", self.message);
        self
    }
}
