use thiserror::Error;

use crate::admissibility::AdmissibilityReport;

pub type Result<T, E = ShellError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum ShellError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("degenerate surface: |d1 psi ^ d2 psi| below threshold at {} node(s), first {:?}", .nodes.len(), .nodes.first())]
    DegenerateSurface { nodes: Vec<usize> },

    #[error("degenerate metric: det(a_ab) <= 0 at {} node(s)", .nodes.len())]
    DegenerateMetric { nodes: Vec<usize> },

    #[error("degenerate reference offset metric at node {node} (v = {offset})")]
    ReferenceDegenerate { node: usize, offset: f64 },

    #[error("numeric domain error: {0}")]
    NumericDomain(String),

    #[error("configuration is not admissible ({} violation(s))", .0.violations.len())]
    Inadmissible(Box<AdmissibilityReport>),

    #[error("validation error at `{field}`: {message}")]
    Validation { field: String, message: String },

    #[error("config parse error at line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },

    #[error("unsupported energy for this probe: {0}")]
    UnsupportedSpec(String),

    #[error("sampling failed: {0}")]
    Sampling(String),

    #[error("blow-up path left the admissible cone: {0}")]
    Path(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl ShellError {
    pub fn validation(field: impl Into<String>, message: impl Into<String>) -> Self {
        ShellError::Validation { field: field.into(), message: message.into() }
    }
}
