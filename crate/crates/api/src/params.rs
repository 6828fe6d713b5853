use std::collections::BTreeMap;
use std::str::FromStr;

use axum::extract::{FromRequestParts, Query};
use axum::http::request::Parts;

use crate::error::ApiError;

/// Raw query parameters; rejections become [`ApiError`]s.
#[derive(Debug, Default)]
pub struct Params(BTreeMap<String, String>);

impl<S: Send + Sync> FromRequestParts<S> for Params {
    type Rejection = ApiError;

    async fn from_request_parts(parts: &mut Parts, state: &S) -> Result<Self, Self::Rejection> {
        let Query(map) = Query::<BTreeMap<String, String>>::from_request_parts(parts, state)
            .await
            .map_err(|e| ApiError::bad_parameter(e.body_text()))?;
        Ok(Self(map))
    }
}

impl Params {
    /// Rejects any parameter not in `allowed`.
    pub fn only(self, allowed: &[&str]) -> Result<Self, ApiError> {
        if let Some(key) = self.0.keys().find(|k| !allowed.contains(&k.as_str())) {
            return Err(ApiError::bad_parameter(format!(
                "unknown parameter '{key}'; expected one of: {}",
                allowed.join(", ")
            )));
        }
        Ok(self)
    }

    pub fn text(&self, key: &str) -> Option<&str> {
        self.0.get(key).map(String::as_str)
    }

    pub fn required(&self, key: &str) -> Result<&str, ApiError> {
        self.text(key)
            .filter(|v| !v.is_empty())
            .ok_or_else(|| ApiError::bad_parameter(format!("missing parameter '{key}'")))
    }

    pub fn parsed<T>(&self, key: &str) -> Result<Option<T>, ApiError>
    where
        T: FromStr,
        T::Err: std::fmt::Display,
    {
        match self.text(key).filter(|v| !v.is_empty()) {
            None => Ok(None),
            Some(raw) => raw
                .parse()
                .map(Some)
                .map_err(|e| ApiError::bad_parameter(format!("parameter '{key}' = {raw:?}: {e}"))),
        }
    }

    pub fn flag(&self, key: &str) -> Result<bool, ApiError> {
        match self.text(key) {
            None | Some("false" | "0") => Ok(false),
            Some("" | "true" | "1") => Ok(true),
            Some(raw) => Err(ApiError::bad_parameter(format!(
                "parameter '{key}' = {raw:?}: expected true or false"
            ))),
        }
    }
}
