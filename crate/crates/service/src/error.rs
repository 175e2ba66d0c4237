use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde::de::DeserializeOwned;
use serde::Serialize;

use sketchface::Error;

/// JSON error body: `{"error", "message", "field"?, "line"?, "column"?}`.
#[derive(Debug, Serialize)]
pub struct ApiError {
    #[serde(skip)]
    pub status: StatusCode,
    pub error: &'static str,
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub field: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub line: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub column: Option<usize>,
}

impl ApiError {
    pub fn new(status: StatusCode, error: &'static str, message: impl Into<String>) -> Self {
        Self {
            status,
            error,
            message: message.into(),
            field: None,
            line: None,
            column: None,
        }
    }

    pub fn unknown_session(id: &str) -> Self {
        Self::new(StatusCode::NOT_FOUND, "unknown_session", format!("no session `{id}`"))
    }

    pub fn busy(status: &str) -> Self {
        Self::new(StatusCode::CONFLICT, "busy", format!("session is {status}"))
    }

    pub fn not_ready(message: impl Into<String>) -> Self {
        Self::new(StatusCode::CONFLICT, "not_ready", message)
    }

    pub fn invalid(message: impl Into<String>) -> Self {
        Self::new(StatusCode::UNPROCESSABLE_ENTITY, "invalid_payload", message)
    }

    pub fn internal(message: impl Into<String>) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", message)
    }
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        match e {
            Error::Parse { line, column, message } => Self {
                line: Some(line),
                column: Some(column),
                ..Self::new(StatusCode::UNPROCESSABLE_ENTITY, "invalid_json", message)
            },
            Error::Version { .. } => Self::new(StatusCode::UNPROCESSABLE_ENTITY, "unsupported_version", e.to_string()),
            Error::Part { ref part, .. } => Self {
                field: Some(format!("layers.{part}")),
                ..Self::invalid(e.to_string())
            },
            Error::UnknownPart(ref part) => Self {
                field: Some(part.clone()),
                ..Self::invalid(e.to_string())
            },
            Error::Io(_) | Error::Image(_) => Self::internal(e.to_string()),
            other => Self::invalid(other.to_string()),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(&self)).into_response()
    }
}

/// Deserializes a request body, reporting the path of the offending field.
pub fn parse_json<T: DeserializeOwned>(body: &[u8]) -> Result<T, ApiError> {
    let mut de = serde_json::Deserializer::from_slice(body);
    let value = serde_path_to_error::deserialize(&mut de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        ApiError {
            field: (path != ".").then_some(path),
            line: Some(inner.line()),
            column: Some(inner.column()),
            ..ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "invalid_json", inner.to_string())
        }
    })?;
    de.end()
        .map_err(|e| ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "invalid_json", e.to_string()))?;
    Ok(value)
}
