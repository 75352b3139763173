//! Machine-readable failures.

use percolab::distributions::MomentCondition;
use percolab::Error;
use serde::Serialize;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CliError {
    pub kind: String,
    pub message: String,
    /// The failed moment condition, `weak` or `strong`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub condition: Option<String>,
}

impl CliError {
    pub fn new(kind: &str, message: impl Into<String>) -> Self {
        Self { kind: kind.into(), message: message.into(), condition: None }
    }

    pub fn to_json(&self) -> String {
        serde_json::json!({ "error": self }).to_string()
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let kind = match &e {
            Error::InvalidParameter(_) => "invalid_parameter",
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::MomentCondition { .. } => "moment_condition",
            Error::AbsoluteContinuity { .. } => "absolute_continuity",
            Error::NonBracketing { .. } => "non_bracketing",
        };
        let condition = match &e {
            Error::MomentCondition { condition: MomentCondition::Weak } => Some("weak".to_string()),
            Error::MomentCondition { condition: MomentCondition::Strong } => Some("strong".to_string()),
            _ => None,
        };
        Self { kind: kind.into(), message: e.to_string(), condition }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::new("io", e.to_string())
    }
}
