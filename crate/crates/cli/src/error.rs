use std::path::PathBuf;

use delayhopf::exprlang::ParseError;
use serde_json::{json, Value};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{field}: {source}")]
    Parse { field: String, source: ParseError },
    #[error(transparent)]
    Numerical(#[from] delayhopf::Error),
    #[error("cannot write {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

impl CliError {
    /// Library errors raised while turning the configuration into a grid and
    /// operator are configuration errors.
    pub fn from_setup(e: delayhopf::Error) -> Self {
        match e {
            delayhopf::Error::Parse(source) => CliError::Parse { field: "expression".into(), source },
            other => CliError::Config(other.to_string()),
        }
    }

    /// 2 for configuration and parse errors, 3 for numerical and I/O failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Parse { .. } => 2,
            CliError::Numerical(e) if is_input_error(e) => 2,
            CliError::Numerical(_) | CliError::Io { .. } => 3,
        }
    }

    pub fn to_json(&self) -> Value {
        let kind = match self {
            CliError::Config(_) => "config",
            CliError::Parse { .. } => "parse",
            CliError::Numerical(e) if is_input_error(e) => "config",
            CliError::Numerical(_) => "numerical",
            CliError::Io { .. } => "io",
        };
        let mut v = json!({ "error": kind, "message": self.to_string(), "exit_code": self.exit_code() });
        if let CliError::Parse { field, source } = self {
            v["field"] = json!(field);
            v["offset"] = json!(source.offset);
        }
        v
    }
}

fn is_input_error(e: &delayhopf::Error) -> bool {
    use delayhopf::Error::*;
    match e {
        InvalidGrid(_) | InvalidCoefficient(_) | Parse(_) | ProbeOutside { .. } | InvalidStep(_) => true,
        AtLambda { source, .. } => is_input_error(source),
        _ => false,
    }
}
