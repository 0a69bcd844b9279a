use std::fmt;

use handcrop::ErrorKind;
use serde::Serialize;

/// Error reported by a subcommand: a class that picks the exit code, the
/// module it came from and a message.
#[derive(Debug)]
pub struct CliError {
    pub kind: ErrorKind,
    pub module: &'static str,
    pub message: String,
}

#[derive(Serialize)]
struct ErrorReport<'a> {
    error: ErrorBody<'a>,
}

#[derive(Serialize)]
struct ErrorBody<'a> {
    kind: &'static str,
    module: &'a str,
    message: &'a str,
}

impl CliError {
    pub fn new(kind: ErrorKind, module: &'static str, message: impl Into<String>) -> Self {
        Self {
            kind,
            module,
            message: message.into(),
        }
    }

    pub fn validation(module: &'static str, message: impl Into<String>) -> Self {
        Self::new(ErrorKind::Validation, module, message)
    }

    pub fn exit_code(&self) -> i32 {
        match self.kind {
            ErrorKind::Validation => 1,
            ErrorKind::Numerical => 2,
            ErrorKind::Io => 3,
        }
    }

    pub fn to_json(&self) -> String {
        let kind = match self.kind {
            ErrorKind::Validation => "validation",
            ErrorKind::Numerical => "numerical",
            ErrorKind::Io => "io",
        };
        serde_json::to_string(&ErrorReport {
            error: ErrorBody {
                kind,
                module: self.module,
                message: &self.message,
            },
        })
        .expect("error report serializes")
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.module, self.message)
    }
}

pub type CliResult<T> = Result<T, CliError>;

/// Tags library errors with the module they came from.
pub trait Tag<T> {
    fn tag(self, module: &'static str) -> CliResult<T>;
}

impl<T> Tag<T> for handcrop::Result<T> {
    fn tag(self, module: &'static str) -> CliResult<T> {
        self.map_err(|e| CliError::new(e.kind(), module, e.to_string()))
    }
}

impl<T> Tag<T> for std::io::Result<T> {
    fn tag(self, module: &'static str) -> CliResult<T> {
        self.map_err(|e| CliError::new(ErrorKind::Io, module, e.to_string()))
    }
}

impl<T> Tag<T> for serde_json::Result<T> {
    fn tag(self, module: &'static str) -> CliResult<T> {
        self.map_err(|e| CliError::validation(module, e.to_string()))
    }
}
