use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use heatlens_core::diagnostics::DiagError;
use serde::{Deserialize, Serialize};

/// Body of every non-2xx response.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub code: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ApiError {
    pub status: StatusCode,
    pub code: &'static str,
    pub message: String,
}

impl ApiError {
    pub const UNKNOWN_COLUMN: &'static str = "UNKNOWN_COLUMN";
    pub const UNKNOWN_METER: &'static str = "UNKNOWN_METER";
    pub const BAD_FILTER: &'static str = "BAD_FILTER";
    pub const BAD_PARAMETER: &'static str = "BAD_PARAMETER";
    pub const NO_DATA: &'static str = "NO_DATA";
    pub const NOT_FOUND: &'static str = "NOT_FOUND";
    pub const INTERNAL: &'static str = "INTERNAL";

    pub fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        Self {
            status,
            code,
            message: message.into(),
        }
    }

    pub fn bad_parameter(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, Self::BAD_PARAMETER, message)
    }

    pub fn no_data(message: impl Into<String>) -> Self {
        Self::new(StatusCode::NOT_FOUND, Self::NO_DATA, message)
    }

    pub fn not_found(message: impl Into<String>) -> Self {
        Self::new(StatusCode::NOT_FOUND, Self::NOT_FOUND, message)
    }

    pub fn internal(message: impl Into<String>) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, Self::INTERNAL, message)
    }
}

impl From<DiagError> for ApiError {
    fn from(e: DiagError) -> Self {
        let message = e.to_string();
        match e {
            DiagError::UnknownColumn(_) => {
                Self::new(StatusCode::NOT_FOUND, Self::UNKNOWN_COLUMN, message)
            }
            DiagError::UnknownMeter(_) => {
                Self::new(StatusCode::NOT_FOUND, Self::UNKNOWN_METER, message)
            }
            DiagError::BadFilter { .. } => {
                Self::new(StatusCode::BAD_REQUEST, Self::BAD_FILTER, message)
            }
            DiagError::BadParameter(_) => Self::bad_parameter(message),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = ErrorBody {
            code: self.code.to_owned(),
            message: self.message,
        };
        (self.status, Json(body)).into_response()
    }
}
