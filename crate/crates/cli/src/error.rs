use std::fmt;
use std::io::ErrorKind;

use geodesic_crossings::Error;

/// A failure with its process exit code.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub kind: &'static str,
    pub message: String,
}

impl CliError {
    pub fn config(message: impl Into<String>) -> Self {
        CliError {
            code: 2,
            kind: "config",
            message: message.into(),
        }
    }

    pub fn missing(path: &std::path::Path) -> Self {
        CliError {
            code: 3,
            kind: "missing_artifact",
            message: format!("missing input file {}", path.display()),
        }
    }
}

impl fmt::Display for CliError {
    /// One line: `error kind=<kind> code=<code> message=<json string>`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let message = serde_json::to_string(&self.message).unwrap_or_else(|_| format!("{:?}", self.message));
        write!(f, "error kind={} code={} message={message}", self.kind, self.code)
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let (code, kind) = match &e {
            Error::Config(_) => (2, "config"),
            Error::Io { source, .. } if source.kind() == ErrorKind::NotFound => (3, "missing_artifact"),
            Error::NumericalInstability(_) => (4, "numerical"),
            Error::Domain(_) => (1, "domain"),
            Error::Resource(_) => (1, "resource"),
            Error::Consistency(_) => (1, "consistency"),
            Error::Cache { .. } => (1, "cache"),
            Error::Io { .. } => (1, "io"),
        };
        CliError {
            code,
            kind,
            message: e.to_string(),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
