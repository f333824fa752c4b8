use thiserror::Error;

use crate::error::GeometryError;
use crate::expr::ExprError;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read `{path}`: {message}")]
    Io { path: String, message: String },
    #[error("malformed scenario: {0}")]
    Parse(String),
    #[error("invalid field `{field}`: {message}")]
    Validation { field: String, message: String },
    #[error("field `{field}`: {source}")]
    Expr {
        field: String,
        #[source]
        source: ExprError,
    },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

impl ScenarioError {
    pub fn validation(field: impl Into<String>, message: impl Into<String>) -> Self {
        ScenarioError::Validation {
            field: field.into(),
            message: message.into(),
        }
    }

    /// Stable error name used in reports.
    pub fn name(&self) -> &'static str {
        match self {
            ScenarioError::Io { .. } => "IoError",
            ScenarioError::Parse(_) => "ParseError",
            ScenarioError::Validation { .. } => "ValidationError",
            ScenarioError::Expr { source, .. } => source.name(),
            ScenarioError::Geometry(g) => g.name(),
        }
    }
}
