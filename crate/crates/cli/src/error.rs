use std::path::Path;

use serde::Serialize;
use thiserror::Error;

/// Position of a problem inside an input file (1-based).
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct Location {
    pub file: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub line: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub column: Option<usize>,
    /// Data row (1-based, header excluded) for CSV problems.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub row: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub field: Option<String>,
}

impl Location {
    pub fn file(path: &Path) -> Self {
        Location { file: path.display().to_string(), ..Location::default() }
    }
}

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad input or arguments. Exit code 1.
    #[error("{message}")]
    User {
        kind: &'static str,
        message: String,
        location: Option<Location>,
    },
    /// Failure inside the tool. Exit code 2.
    #[error("{0}")]
    Internal(String),
}

pub type CliResult<T> = Result<T, CliError>;

impl CliError {
    pub fn user(kind: &'static str, message: impl Into<String>) -> Self {
        CliError::User { kind, message: message.into(), location: None }
    }

    pub fn at(kind: &'static str, message: impl Into<String>, location: Location) -> Self {
        CliError::User { kind, message: message.into(), location: Some(location) }
    }

    pub fn io(path: &Path, err: std::io::Error) -> Self {
        CliError::at("io", format!("{}: {err}", path.display()), Location::file(path))
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::User { .. } => 1,
            CliError::Internal(_) => 2,
        }
    }

    /// Machine-readable error object.
    pub fn to_json(&self) -> serde_json::Value {
        let (kind, location) = match self {
            CliError::User { kind, location, .. } => (*kind, location.as_ref()),
            CliError::Internal(_) => ("internal", None),
        };
        let mut obj = serde_json::json!({
            "kind": kind,
            "message": self.to_string(),
            "exit_code": self.exit_code(),
        });
        if let Some(loc) = location {
            obj["location"] = serde_json::to_value(loc).expect("location serializes");
        }
        serde_json::json!({ "error": obj })
    }
}

impl From<lcirt::error::Error> for CliError {
    fn from(e: lcirt::error::Error) -> Self {
        use lcirt::error::Error as E;
        match e {
            E::SingularUpdate(_) | E::InstanceTooLarge(_) => CliError::Internal(e.to_string()),
            E::Invalid(_) | E::DimensionMismatch(_) | E::CategoryOutOfRange { .. } => CliError::user("model", e.to_string()),
            E::InvalidOptions(_) | E::UnknownStrategy(_) => CliError::user("options", e.to_string()),
            E::InvalidParameters(_) | E::ZeroVariance(_) => CliError::user("parameters", e.to_string()),
            E::InvalidSpec(_) => CliError::user("simulation", e.to_string()),
            E::NotNested(_) => CliError::user("test", e.to_string()),
        }
    }
}
