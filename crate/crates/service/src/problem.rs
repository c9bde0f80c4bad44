use axum::extract::rejection::{JsonRejection, QueryRejection};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use dramaturg_core::session::SessionError;
use serde::{Deserialize, Serialize};

/// Error body, served as `application/problem+json`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Problem {
    pub status: u16,
    /// Machine-readable, e.g. `cooldown`.
    pub code: String,
    pub title: String,
    pub detail: String,
}

impl Problem {
    pub fn new(status: StatusCode, code: &str, detail: impl Into<String>) -> Self {
        Problem {
            status: status.as_u16(),
            code: code.into(),
            title: status.canonical_reason().unwrap_or("Error").into(),
            detail: detail.into(),
        }
    }

    pub fn bad_request(detail: impl Into<String>) -> Self {
        Problem::new(StatusCode::BAD_REQUEST, "bad_request", detail)
    }

    pub fn unknown_session(id: &str) -> Self {
        Problem::new(StatusCode::NOT_FOUND, "unknown_session", format!("no session `{id}`"))
    }

    pub fn internal(detail: impl Into<String>) -> Self {
        Problem::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", detail)
    }
}

impl From<SessionError> for Problem {
    fn from(e: SessionError) -> Self {
        let (status, code) = match &e {
            SessionError::SessionFinished => (StatusCode::GONE, "finished"),
            SessionError::Paused => (StatusCode::CONFLICT, "paused"),
            SessionError::NotPaused => (StatusCode::CONFLICT, "not_paused"),
            SessionError::CooldownViolation(_) => (StatusCode::CONFLICT, "cooldown"),
            SessionError::ActNotActive(_) => (StatusCode::CONFLICT, "act_not_active"),
            SessionError::UnknownAct(_) => (StatusCode::NOT_FOUND, "unknown_act"),
            SessionError::UnknownRole(_) => (StatusCode::UNPROCESSABLE_ENTITY, "unknown_role"),
            SessionError::EmptyUtterance => (StatusCode::UNPROCESSABLE_ENTITY, "empty_utterance"),
            SessionError::Config(_) => (StatusCode::UNPROCESSABLE_ENTITY, "invalid_config"),
            SessionError::Director(_) | SessionError::Actor(_) | SessionError::Llm(_) => {
                (StatusCode::BAD_GATEWAY, "generation_failed")
            }
            SessionError::Record(_) => (StatusCode::INTERNAL_SERVER_ERROR, "record"),
        };
        Problem::new(status, code, e.to_string())
    }
}

impl From<JsonRejection> for Problem {
    fn from(e: JsonRejection) -> Self {
        Problem::bad_request(e.body_text())
    }
}

impl From<QueryRejection> for Problem {
    fn from(e: QueryRejection) -> Self {
        Problem::bad_request(e.body_text())
    }
}

impl IntoResponse for Problem {
    fn into_response(self) -> Response {
        let status = StatusCode::from_u16(self.status).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        let body = serde_json::to_string(&self).expect("problem serializes");
        (status, [(header::CONTENT_TYPE, "application/problem+json")], body).into_response()
    }
}
