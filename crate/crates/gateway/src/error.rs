use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use nora_core::chat::ChatError;
use nora_core::config::ConfigError;
use nora_core::dialogue::DialogueError;
use nora_core::empathy::EmpathyError;
use nora_core::nlu::NluError;
use nora_core::profile::ProfileError;
use nora_core::screening::ScreeningError;
use nora_core::store::StoreError;
use nora_core::ErrorKind;
use serde::{Deserialize, Serialize};

/// Any failure surfaced by the gateway: a module error class plus a
/// human-readable message.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{kind:?}: {message}")]
pub struct GatewayError {
    pub kind: ErrorKind,
    pub message: String,
}

impl GatewayError {
    pub fn new(kind: ErrorKind, message: impl Into<String>) -> Self {
        Self {
            kind,
            message: message.into(),
        }
    }

    pub fn invalid(message: impl Into<String>) -> Self {
        Self::new(ErrorKind::InvalidInput, message)
    }

    pub fn unauthorized(message: impl Into<String>) -> Self {
        Self::new(ErrorKind::Unauthorized, message)
    }

    pub fn status(&self) -> StatusCode {
        status(self.kind)
    }
}

/// One status per error class, no two classes sharing a status.
pub fn status(kind: ErrorKind) -> StatusCode {
    match kind {
        ErrorKind::InvalidInput => StatusCode::BAD_REQUEST,
        ErrorKind::Unauthorized => StatusCode::UNAUTHORIZED,
        ErrorKind::Forbidden => StatusCode::FORBIDDEN,
        ErrorKind::NotFound => StatusCode::NOT_FOUND,
        ErrorKind::Conflict => StatusCode::CONFLICT,
        ErrorKind::InvalidState => StatusCode::UNPROCESSABLE_ENTITY,
        ErrorKind::Provider => StatusCode::BAD_GATEWAY,
        ErrorKind::Storage => StatusCode::INTERNAL_SERVER_ERROR,
    }
}

/// JSON body of every error response.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: ErrorKind,
    pub message: String,
}

impl IntoResponse for GatewayError {
    fn into_response(self) -> Response {
        let body = ErrorBody {
            error: self.kind,
            message: self.message,
        };
        (status(body.error), Json(body)).into_response()
    }
}

macro_rules! from_module_error {
    ($($t:ty),*) => {$(
        impl From<$t> for GatewayError {
            fn from(e: $t) -> Self {
                Self::new(e.kind(), e.to_string())
            }
        }
    )*};
}

from_module_error!(
    ChatError,
    ConfigError,
    DialogueError,
    EmpathyError,
    NluError,
    ProfileError,
    ScreeningError,
    StoreError
);

pub type GatewayResult<T> = Result<T, GatewayError>;
