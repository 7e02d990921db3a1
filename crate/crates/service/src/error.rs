use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("illegal move: {0}")]
    IllegalMove(String),
    #[error("it is not your turn")]
    NotYourTurn,
    #[error("the game has finished")]
    SessionFinished,
    #[error("bad config: {0}")]
    BadConfig(String),
    #[error("no such game: {0}")]
    NotFound(String),
    #[error("session limit of {0} reached")]
    TooManySessions(usize),
    #[error("engine failure: {0}")]
    Engine(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl ServiceError {
    pub fn code(&self) -> &'static str {
        match self {
            ServiceError::IllegalMove(_) => "IllegalMove",
            ServiceError::NotYourTurn => "NotYourTurn",
            ServiceError::SessionFinished => "SessionFinished",
            ServiceError::BadConfig(_) => "BadConfig",
            ServiceError::NotFound(_) => "NotFound",
            ServiceError::TooManySessions(_) => "TooManySessions",
            ServiceError::Engine(_) => "EngineFailure",
            ServiceError::Io(_) | ServiceError::Json(_) => "Internal",
        }
    }

    pub fn status(&self) -> StatusCode {
        match self {
            ServiceError::IllegalMove(_) | ServiceError::BadConfig(_) => StatusCode::BAD_REQUEST,
            ServiceError::NotYourTurn | ServiceError::SessionFinished => StatusCode::CONFLICT,
            ServiceError::NotFound(_) => StatusCode::NOT_FOUND,
            ServiceError::TooManySessions(_) => StatusCode::SERVICE_UNAVAILABLE,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }
}

impl IntoResponse for ServiceError {
    fn into_response(self) -> Response {
        let body = serde_json::json!({ "error": self.code(), "message": self.to_string() });
        (self.status(), Json(body)).into_response()
    }
}
