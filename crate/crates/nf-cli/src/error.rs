use std::path::PathBuf;

use nf_core::CoreError;
use serde_json::json;
use thiserror::Error;

#[derive(Error, Debug)]
pub enum CliError {
    #[error("config does not parse: {0}")]
    Parse(String),

    #[error("invalid `{path}`: {message}")]
    Validation { path: String, message: String },

    #[error("solver failure: {0}")]
    Solver(CoreError),

    #[error("certification failed: {}", .0.join("; "))]
    Certification(Vec<String>),

    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
}

impl CliError {
    pub fn validation(path: &str, message: impl Into<String>) -> Self {
        CliError::Validation { path: path.to_string(), message: message.into() }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Parse(_) | CliError::Validation { .. } => 2,
            CliError::Solver(_) => 3,
            CliError::Certification(_) => 4,
            CliError::Io { .. } => 1,
        }
    }

    fn category(&self) -> &'static str {
        match self {
            CliError::Parse(_) => "parse",
            CliError::Validation { .. } => "validation",
            CliError::Solver(_) => "solver",
            CliError::Certification(_) => "certification",
            CliError::Io { .. } => "io",
        }
    }

    /// One-line JSON report for stderr.
    pub fn report(&self) -> String {
        let field = match self {
            CliError::Validation { path, .. } => Some(path.clone()),
            _ => None,
        };
        json!({
            "status": "error",
            "exit_code": self.exit_code(),
            "category": self.category(),
            "field": field,
            "message": self.to_string(),
        })
        .to_string()
    }
}
