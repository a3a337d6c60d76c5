use std::fmt;

use serde::Serialize;
use tvvar_core::Error as CoreError;

/// Failure class, which fixes the process exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ErrorKind {
    Config,
    Data,
    Numerical,
}

impl ErrorKind {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorKind::Config => 2,
            ErrorKind::Data => 3,
            ErrorKind::Numerical => 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CliError {
    pub kind: ErrorKind,
    pub message: String,
}

impl CliError {
    pub fn config(message: impl Into<String>) -> Self {
        Self { kind: ErrorKind::Config, message: message.into() }
    }

    pub fn data(message: impl Into<String>) -> Self {
        Self { kind: ErrorKind::Data, message: message.into() }
    }

    pub fn numerical(message: impl Into<String>) -> Self {
        Self { kind: ErrorKind::Numerical, message: message.into() }
    }

    pub fn exit_code(&self) -> i32 {
        self.kind.exit_code()
    }

    /// One-line JSON record written to stderr on failure.
    pub fn to_json(&self) -> String {
        serde_json::json!({ "schema": 1, "error": self }).to_string()
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?} error: {}", self.kind, self.message)
    }
}

impl std::error::Error for CliError {}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        let kind = match &e {
            CoreError::InvalidParameter(_)
            | CoreError::BandwidthTooSmall { .. }
            | CoreError::NoFeasibleBandwidth { .. } => ErrorKind::Config,
            CoreError::InvalidData(_)
            | CoreError::InsufficientSample { .. }
            | CoreError::DimensionMismatch { .. } => ErrorKind::Data,
            CoreError::NotSquare { .. }
            | CoreError::NotPositiveDefinite { .. }
            | CoreError::Singular(_)
            | CoreError::EigenNoConvergence { .. }
            | CoreError::SingularDesign { .. }
            | CoreError::NonStationary { .. }
            | CoreError::NoFeasibleLag(_) => ErrorKind::Numerical,
        };
        Self { kind, message: e.to_string() }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn core_errors_map_to_exit_codes() {
        assert_eq!(CliError::from(CoreError::InvalidParameter("x".into())).exit_code(), 2);
        assert_eq!(CliError::from(CoreError::InsufficientSample { needed: 3, got: 1 }).exit_code(), 3);
        assert_eq!(CliError::from(CoreError::SingularDesign { tau: 0.5, condition: 1e13 }).exit_code(), 4);
        assert_eq!(CliError::from(CoreError::NonStationary { tau: 0.5, radius: 1.1 }).exit_code(), 4);
    }

    #[test]
    fn json_record_is_structured() {
        let v: serde_json::Value = serde_json::from_str(&CliError::data("bad cell").to_json()).unwrap();
        assert_eq!(v["schema"], 1);
        assert_eq!(v["error"]["kind"], "data");
        assert_eq!(v["error"]["message"], "bad cell");
    }
}
