use axum::extract::rejection::{JsonRejection, QueryRejection};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use doclabeler::{Error, Violation};

/// JSON error body shared by every endpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub code: String,
    pub message: String,
    #[serde(default)]
    pub details: Value,
}

#[derive(Debug, Clone)]
pub struct ApiError {
    pub status: StatusCode,
    pub body: Box<ErrorBody>,
}

impl ApiError {
    pub fn new(status: StatusCode, code: &str, message: impl Into<String>) -> Self {
        Self {
            status,
            body: Box::new(ErrorBody {
                code: code.into(),
                message: message.into(),
                details: Value::Null,
            }),
        }
    }

    pub fn with_details(mut self, details: Value) -> Self {
        self.body.details = details;
        self
    }

    pub fn not_found(what: &str, id: &str) -> Self {
        Self::new(StatusCode::NOT_FOUND, "not_found", format!("unknown {what} {id:?}"))
    }

    pub fn violations(violations: &[Violation]) -> Self {
        Self::new(StatusCode::UNPROCESSABLE_ENTITY, "validation", "page fails validation")
            .with_details(serde_json::to_value(violations).unwrap_or_default())
    }

    pub fn internal(message: impl Into<String>) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", message)
    }
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        let (status, code) = match &e {
            Error::UnknownSegment { .. }
            | Error::EmptySelection
            | Error::UnknownLabel(_)
            | Error::MissingLabels(_)
            | Error::InvalidArgument(_)
            | Error::EmptyEvaluation
            | Error::IdMismatch { .. }
            | Error::TooFewPages { .. } => (StatusCode::UNPROCESSABLE_ENTITY, "validation"),
            Error::Malformed { .. } | Error::Json { .. } | Error::Encrypted | Error::Pdf(_) => {
                (StatusCode::UNPROCESSABLE_ENTITY, "bad_input")
            }
            Error::LabelerTimeout => (StatusCode::GATEWAY_TIMEOUT, "labeler_timeout"),
            Error::LabelerResponse { .. } | Error::Labeler(_) => (StatusCode::BAD_GATEWAY, "labeler"),
            Error::MissingImage(_) => (StatusCode::NOT_FOUND, "missing_image"),
            Error::Io { .. } | Error::Image { .. } => (StatusCode::INTERNAL_SERVER_ERROR, "io"),
        };
        let details = match &e {
            Error::Malformed { file, record, .. } => serde_json::json!({ "file": file, "record": record }),
            Error::IdMismatch { missing } => serde_json::json!({ "missing": missing }),
            Error::MissingLabels(labels) => serde_json::json!({ "missing": labels }),
            Error::UnknownSegment { page_id, id } => serde_json::json!({ "page_id": page_id, "segment_id": id }),
            Error::LabelerResponse { field, .. } => serde_json::json!({ "field": field }),
            _ => Value::Null,
        };
        Self::new(status, code, e.to_string()).with_details(details)
    }
}

impl From<JsonRejection> for ApiError {
    fn from(e: JsonRejection) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "bad_request", e.body_text())
    }
}

impl From<QueryRejection> for ApiError {
    fn from(e: QueryRejection) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "bad_request", e.body_text())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(*self.body)).into_response()
    }
}
