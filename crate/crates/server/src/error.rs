use std::fmt;

use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use foodrec_core::analysis::AnalysisError;
use foodrec_core::{BoxViolation, FieldViolation, LifecycleError, LifecycleState, StoreError};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

/// The closed set of machine-readable error codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ErrorCode {
    ValidationFailed,
    IllegalTransition,
    VersionConflict,
    NotFound,
    SidecarMissing,
    PayloadTooLarge,
    Unauthorized,
    Forbidden,
    MethodNotAllowed,
    AnalysisUnavailable,
    StoreUnavailable,
    Internal,
}

impl ErrorCode {
    pub const ALL: [ErrorCode; 12] = [
        ErrorCode::ValidationFailed,
        ErrorCode::IllegalTransition,
        ErrorCode::VersionConflict,
        ErrorCode::NotFound,
        ErrorCode::SidecarMissing,
        ErrorCode::PayloadTooLarge,
        ErrorCode::Unauthorized,
        ErrorCode::Forbidden,
        ErrorCode::MethodNotAllowed,
        ErrorCode::AnalysisUnavailable,
        ErrorCode::StoreUnavailable,
        ErrorCode::Internal,
    ];

    pub fn status(self) -> StatusCode {
        match self {
            ErrorCode::ValidationFailed => StatusCode::BAD_REQUEST,
            ErrorCode::IllegalTransition | ErrorCode::VersionConflict => StatusCode::CONFLICT,
            ErrorCode::NotFound => StatusCode::NOT_FOUND,
            ErrorCode::SidecarMissing => StatusCode::UNPROCESSABLE_ENTITY,
            ErrorCode::PayloadTooLarge => StatusCode::PAYLOAD_TOO_LARGE,
            ErrorCode::Unauthorized => StatusCode::UNAUTHORIZED,
            ErrorCode::Forbidden => StatusCode::FORBIDDEN,
            ErrorCode::MethodNotAllowed => StatusCode::METHOD_NOT_ALLOWED,
            ErrorCode::AnalysisUnavailable | ErrorCode::StoreUnavailable => {
                StatusCode::SERVICE_UNAVAILABLE
            }
            ErrorCode::Internal => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ErrorCode::ValidationFailed => "VALIDATION_FAILED",
            ErrorCode::IllegalTransition => "ILLEGAL_TRANSITION",
            ErrorCode::VersionConflict => "VERSION_CONFLICT",
            ErrorCode::NotFound => "NOT_FOUND",
            ErrorCode::SidecarMissing => "SIDECAR_MISSING",
            ErrorCode::PayloadTooLarge => "PAYLOAD_TOO_LARGE",
            ErrorCode::Unauthorized => "UNAUTHORIZED",
            ErrorCode::Forbidden => "FORBIDDEN",
            ErrorCode::MethodNotAllowed => "METHOD_NOT_ALLOWED",
            ErrorCode::AnalysisUnavailable => "ANALYSIS_UNAVAILABLE",
            ErrorCode::StoreUnavailable => "STORE_UNAVAILABLE",
            ErrorCode::Internal => "INTERNAL",
        }
    }
}

impl fmt::Display for ErrorCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Error body returned by every failing endpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApiError {
    pub status: u16,
    pub code: ErrorCode,
    pub message: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub details: Option<Value>,
}

impl ApiError {
    pub fn new(code: ErrorCode, message: impl Into<String>) -> Self {
        Self {
            status: code.status().as_u16(),
            code,
            message: message.into(),
            details: None,
        }
    }

    pub fn with_details(mut self, details: Value) -> Self {
        self.details = Some(details);
        self
    }

    pub fn validation(violations: Vec<FieldViolation>) -> Self {
        let message = match violations.as_slice() {
            [only] => format!("{}: {}", only.field, only.reason),
            many => {
                let fields: Vec<&str> = many.iter().map(|v| v.field.as_str()).collect();
                format!("invalid fields: {}", fields.join(", "))
            }
        };
        Self::new(ErrorCode::ValidationFailed, message)
            .with_details(json!({ "violations": violations }))
    }

    pub fn invalid(field: &str, reason: impl Into<String>) -> Self {
        Self::validation(vec![FieldViolation::new(field, reason)])
    }

    pub fn not_found(what: impl fmt::Display) -> Self {
        Self::new(ErrorCode::NotFound, format!("{what} not found"))
    }

    pub fn illegal_transition(from: LifecycleState, to: LifecycleState) -> Self {
        Self::new(
            ErrorCode::IllegalTransition,
            format!("cannot move from {from} to {to}"),
        )
        .with_details(json!({ "from": from, "to": to }))
    }

    /// Rejection of an operation that is not allowed in the current state
    /// and is not itself a transition, such as editing a finalized record.
    pub fn wrong_state(state: LifecycleState, operation: &str) -> Self {
        Self::new(
            ErrorCode::IllegalTransition,
            format!("{operation} is not allowed in state {state}"),
        )
        .with_details(json!({ "state": state, "operation": operation }))
    }

    pub fn version_conflict(current: u64) -> Self {
        Self::new(
            ErrorCode::VersionConflict,
            format!("stale version; current version is {current}"),
        )
        .with_details(json!({ "current_version": current }))
    }

    pub fn too_large(part: &str, limit: usize) -> Self {
        Self::new(
            ErrorCode::PayloadTooLarge,
            format!("{part} exceeds the {limit} byte limit"),
        )
        .with_details(json!({ "part": part, "limit_bytes": limit }))
    }

    pub fn internal(message: impl Into<String>) -> Self {
        Self::new(ErrorCode::Internal, message)
    }
}

impl fmt::Display for ApiError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.code, self.message)
    }
}

impl std::error::Error for ApiError {}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.code.status(), Json(self)).into_response()
    }
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        match e {
            StoreError::NotFound(id) => ApiError::not_found(format!("occasion {id}")),
            StoreError::VersionConflict { stored } => ApiError::version_conflict(stored),
            StoreError::Unavailable(msg) => ApiError::new(ErrorCode::StoreUnavailable, msg),
            other => ApiError::internal(other.to_string()),
        }
    }
}

impl From<LifecycleError> for ApiError {
    fn from(e: LifecycleError) -> Self {
        match e {
            LifecycleError::IllegalTransition { from, to } => {
                ApiError::illegal_transition(from, to)
            }
            LifecycleError::MissingAfterImage => ApiError::invalid("after", e.to_string()),
        }
    }
}

impl From<AnalysisError> for ApiError {
    fn from(e: AnalysisError) -> Self {
        let message = e.to_string();
        match e {
            AnalysisError::SidecarMissing(_) => ApiError::new(ErrorCode::SidecarMissing, message),
            AnalysisError::Decode(_) => ApiError::invalid("before", message),
            AnalysisError::SidecarMalformed { .. }
            | AnalysisError::InvalidPrediction(_)
            | AnalysisError::Unavailable(_) => {
                ApiError::new(ErrorCode::AnalysisUnavailable, message)
            }
            AnalysisError::HashMismatch(_) => ApiError::internal(message),
        }
    }
}

pub(crate) fn box_violations(field: &str, violations: &[BoxViolation]) -> Vec<FieldViolation> {
    violations
        .iter()
        .map(|v| FieldViolation::new(field, v.to_string()))
        .collect()
}
