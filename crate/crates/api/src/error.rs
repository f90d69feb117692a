use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde::Serialize;
use thiserror::Error;

/// Every failure the service reports. Each maps to one status code and a
/// stable snake_case `code` in the `{code, message}` body.
#[derive(Debug, Error)]
pub enum ApiError {
    #[error("{0}")]
    BadQuery(String),
    #[error("missing or wrong X-Session-Token header")]
    Unauthorized,
    #[error("unknown session {0:?}")]
    UnknownSession(String),
    #[error("session {0:?} already exists")]
    SessionExists(String),
    #[error("{0}")]
    OutOfOrder(String),
    #[error("comment {0:?} already has a decision; resubmit with ?amend=true to change it")]
    AlreadyLabeled(String),
    #[error("sessions share no decided comments")]
    Disjoint,
    #[error("{0}")]
    InvalidLabel(String),
    #[error("unknown comment {0:?}")]
    UnknownComment(String),
    #[error("{0}")]
    Agreement(String),
    #[error("storage failure: {0}")]
    Storage(String),
}

#[derive(Serialize)]
struct ErrorBody<'a> {
    code: &'a str,
    message: String,
}

impl ApiError {
    pub fn status(&self) -> StatusCode {
        match self {
            ApiError::BadQuery(_) => StatusCode::BAD_REQUEST,
            ApiError::Unauthorized => StatusCode::UNAUTHORIZED,
            ApiError::UnknownSession(_) => StatusCode::NOT_FOUND,
            ApiError::SessionExists(_) | ApiError::OutOfOrder(_) | ApiError::AlreadyLabeled(_) | ApiError::Disjoint => {
                StatusCode::CONFLICT
            }
            ApiError::InvalidLabel(_) | ApiError::UnknownComment(_) | ApiError::Agreement(_) => {
                StatusCode::UNPROCESSABLE_ENTITY
            }
            ApiError::Storage(_) => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }

    pub fn code(&self) -> &'static str {
        match self {
            ApiError::BadQuery(_) => "bad_request",
            ApiError::Unauthorized => "unauthorized",
            ApiError::UnknownSession(_) => "unknown_session",
            ApiError::SessionExists(_) => "session_exists",
            ApiError::OutOfOrder(_) => "out_of_order",
            ApiError::AlreadyLabeled(_) => "already_labeled",
            ApiError::Disjoint => "disjoint_sessions",
            ApiError::InvalidLabel(_) => "invalid_path",
            ApiError::UnknownComment(_) => "unknown_comment",
            ApiError::Agreement(_) => "degenerate_table",
            ApiError::Storage(_) => "storage",
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        if let ApiError::Storage(msg) = &self {
            log::error!("{msg}");
        }
        let body = ErrorBody {
            code: self.code(),
            message: self.to_string(),
        };
        (self.status(), Json(body)).into_response()
    }
}
