use latticegraph::error::{ConfigError, FormatError, ModelError};
use latticegraph::Error;
use serde_json::json;

pub const CONFIG: u8 = 2;
pub const SOLVER: u8 = 3;
pub const MISMATCH: u8 = 4;
pub const IO: u8 = 5;
const OTHER: u8 = 1;

/// A failed command: exit code plus a machine-readable reason.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub kind: &'static str,
    pub message: String,
}

impl Failure {
    pub fn new(code: u8, kind: &'static str, message: impl Into<String>) -> Self {
        Failure {
            code,
            kind,
            message: message.into(),
        }
    }

    pub fn usage(message: &str) -> Self {
        Failure::new(CONFIG, "usage", message)
    }

    pub fn to_json(&self) -> String {
        json!({ "error": self.kind, "exit_code": self.code, "message": self.message }).to_string()
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let message = e.to_string();
        match e {
            Error::Config(_) | Error::Geometry(_) => Failure::new(CONFIG, "config", message),
            Error::Continuum(_) | Error::Solver(_) => Failure::new(SOLVER, "solver", message),
            Error::Format(f) => f.into(),
            Error::Model(ModelError::ArchitectureMismatch(_)) | Error::Nn(_) | Error::Dataset(_) => {
                Failure::new(MISMATCH, "artifact_mismatch", message)
            }
            Error::Model(ModelError::NonFinite { .. }) => Failure::new(SOLVER, "non_finite", message),
            Error::Model(_) => Failure::new(OTHER, "model", message),
        }
    }
}

impl From<FormatError> for Failure {
    fn from(e: FormatError) -> Self {
        match e {
            FormatError::Io(_) => Failure::new(IO, "io", e.to_string()),
            _ => Failure::new(MISMATCH, "artifact_mismatch", e.to_string()),
        }
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::new(CONFIG, "config", e.to_string())
    }
}

impl From<ModelError> for Failure {
    fn from(e: ModelError) -> Self {
        Error::from(e).into()
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::new(IO, "io", e.to_string())
    }
}
