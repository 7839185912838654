//! Errors surfaced to the command line, each with a fixed exit code.

use qci_core::analysis::AnalysisError;
use qci_core::kinematics::KinematicsError;
use qci_core::wavegroups::WavegroupError;
use qci_core::{FieldError, QuadratureError, ScenarioError};
use serde_json::json;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Convergence(String),
    #[error("{0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Convergence(_) => 3,
            CliError::Io(_) => 4,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Validation(_) => "validation",
            CliError::Convergence(_) => "convergence",
            CliError::Io(_) => "io",
        }
    }

    /// One-line machine-readable form written to stderr.
    pub fn to_json(&self) -> String {
        json!({ "error": { "kind": self.kind(), "exit_code": self.exit_code(), "message": self.to_string() } })
            .to_string()
    }

    pub fn io(context: impl std::fmt::Display, err: std::io::Error) -> Self {
        CliError::Io(format!("{context}: {err}"))
    }
}

impl From<QuadratureError> for CliError {
    fn from(e: QuadratureError) -> Self {
        match e {
            QuadratureError::NotConverged { .. } => CliError::Convergence(e.to_string()),
            _ => CliError::Validation(e.to_string()),
        }
    }
}

impl From<WavegroupError> for CliError {
    fn from(e: WavegroupError) -> Self {
        match e {
            WavegroupError::Quadrature(q) => q.into(),
            other => CliError::Validation(other.to_string()),
        }
    }
}

impl From<AnalysisError> for CliError {
    fn from(e: AnalysisError) -> Self {
        match e {
            AnalysisError::Quadrature(q) => q.into(),
            AnalysisError::Wavegroup(w) => w.into(),
            other => CliError::Validation(other.to_string()),
        }
    }
}

impl From<ScenarioError> for CliError {
    fn from(e: ScenarioError) -> Self {
        CliError::Validation(e.to_string())
    }
}

impl From<FieldError> for CliError {
    fn from(e: FieldError) -> Self {
        CliError::Validation(e.to_string())
    }
}

impl From<KinematicsError> for CliError {
    fn from(e: KinematicsError) -> Self {
        CliError::Validation(e.to_string())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_follow_error_class() {
        let nc = QuadratureError::NotConverged { history: vec![(128, 0.1)] };
        assert_eq!(CliError::from(nc.clone()).exit_code(), 3);
        assert_eq!(CliError::from(AnalysisError::Wavegroup(WavegroupError::Quadrature(nc))).exit_code(), 3);
        assert_eq!(CliError::from(FieldError::EmptyAxis("x1".into())).exit_code(), 2);
        let io = CliError::io("out.csv", std::io::Error::other("disk full"));
        assert_eq!(io.exit_code(), 4);
        let v: serde_json::Value = serde_json::from_str(&io.to_json()).unwrap();
        assert_eq!(v["error"]["kind"], "io");
        assert_eq!(v["error"]["exit_code"], 4);
    }
}
