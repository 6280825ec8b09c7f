use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;

/// An HTTP error with a JSON body `{"error": message}`.
#[derive(Debug, Clone, PartialEq)]
pub struct ApiError {
    pub status: u16,
    pub message: String,
}

impl ApiError {
    fn new(status: u16, message: impl ToString) -> Self {
        ApiError { status, message: message.to_string() }
    }

    pub fn bad_request(m: impl ToString) -> Self {
        Self::new(400, m)
    }

    pub fn not_found(id: &str) -> Self {
        Self::new(404, format!("no trial {id}"))
    }

    pub fn conflict(m: impl ToString) -> Self {
        Self::new(409, m)
    }

    pub fn unprocessable(m: impl ToString) -> Self {
        Self::new(422, m)
    }

    pub fn internal(m: impl ToString) -> Self {
        Self::new(500, m)
    }

    /// Errors a design raises about the posted data are the client's;
    /// anything else is ours.
    pub fn from_core(e: dosefind::Error) -> Self {
        use dosefind::Error::*;
        match e {
            InvalidCounts { .. }
            | LevelOutOfRange { .. }
            | CohortSizeMismatch { .. }
            | NonUnitCohort(_)
            | NoDataAtLevel(_)
            | MalformedHistory(_) => Self::unprocessable(e),
            other => Self::internal(other),
        }
    }
}

impl std::fmt::Display for ApiError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} {}", self.status, self.message)
    }
}

impl std::error::Error for ApiError {}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = StatusCode::from_u16(self.status).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        (status, Json(serde_json::json!({ "error": self.message }))).into_response()
    }
}
