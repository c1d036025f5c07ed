use std::path::PathBuf;

use serde::Serialize;

use forestview_core::Error as CoreError;

/// Where in an upload a parse failure happened.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Diagnostic {
    pub line: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub column: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub value: Option<String>,
}

#[derive(Clone, Debug, thiserror::Error)]
pub enum ServiceError {
    #[error("session `{0}` not found")]
    SessionNotFound(String),
    #[error("cluster {cluster} not found: minimum size {min_size} gives {count} clusters")]
    ClusterNotFound { cluster: usize, min_size: usize, count: usize },
    #[error("{message}")]
    BadRequest {
        message: String,
        diagnostic: Option<Diagnostic>,
    },
    #[error("{}: {message}", file.display())]
    Store { file: PathBuf, message: String },
    #[error("{0}")]
    Internal(String),
}

pub type Result<T, E = ServiceError> = std::result::Result<T, E>;

impl ServiceError {
    pub fn bad_request(message: impl Into<String>) -> Self {
        ServiceError::BadRequest {
            message: message.into(),
            diagnostic: None,
        }
    }

    pub fn store(file: impl Into<PathBuf>, message: impl ToString) -> Self {
        ServiceError::Store {
            file: file.into(),
            message: message.to_string(),
        }
    }

    /// Short machine-readable kind.
    pub fn kind(&self) -> &'static str {
        match self {
            ServiceError::SessionNotFound(_) | ServiceError::ClusterNotFound { .. } => "not_found",
            ServiceError::BadRequest { .. } => "bad_request",
            ServiceError::Store { .. } => "store",
            ServiceError::Internal(_) => "internal",
        }
    }
}

impl From<CoreError> for ServiceError {
    fn from(e: CoreError) -> Self {
        let message = e.to_string();
        let diagnostic = match &e {
            CoreError::NonRectangular { line, .. } => Some(Diagnostic {
                line: *line,
                column: None,
                value: None,
            }),
            CoreError::Unparseable { line, column, value } => Some(Diagnostic {
                line: *line,
                column: Some(column.clone()),
                value: Some(value.clone()),
            }),
            CoreError::Csv(c) => c.position().map(|p| Diagnostic {
                line: p.line(),
                column: None,
                value: None,
            }),
            CoreError::Json(j) => Some(Diagnostic {
                line: j.line() as u64,
                column: Some(format!("{}", j.column())),
                value: None,
            }),
            _ => None,
        };
        match e {
            CoreError::FeatureMismatch(..) | CoreError::NotSymmetric(..) | CoreError::Empty(_) => {
                ServiceError::Internal(message)
            }
            _ => ServiceError::BadRequest { message, diagnostic },
        }
    }
}
