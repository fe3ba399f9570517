//! Request handlers shared by the in-process and HTTP transports.

use std::fmt;
use std::str::FromStr;

use serde::{de::DeserializeOwned, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Endpoint {
    Count,
    Roots,
    Query,
}

impl Endpoint {
    pub const ALL: [Endpoint; 3] = [Endpoint::Count, Endpoint::Roots, Endpoint::Query];

    pub fn path(self) -> &'static str {
        match self {
            Endpoint::Count => "/count",
            Endpoint::Roots => "/roots",
            Endpoint::Query => "/query",
        }
    }
}

impl fmt::Display for Endpoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.path())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ServiceError {
    #[error("service unavailable")]
    Unavailable,
    #[error("bad request: {0}")]
    BadRequest(String),
    #[error("endpoint {0} not served here")]
    NotFound(String),
    #[error("query rejected: {0}")]
    QueryRejected(String),
    #[error("internal error: {0}")]
    Internal(String),
}

impl ServiceError {
    pub fn status(&self) -> u16 {
        match self {
            ServiceError::Unavailable => 503,
            ServiceError::BadRequest(_) => 400,
            ServiceError::NotFound(_) => 404,
            ServiceError::QueryRejected(_) => 422,
            ServiceError::Internal(_) => 500,
        }
    }

    /// Inverse of [`ServiceError::status`], used by the HTTP client.
    pub fn from_status(status: u16, message: String) -> Self {
        match status {
            503 => ServiceError::Unavailable,
            400 => ServiceError::BadRequest(message),
            404 => ServiceError::NotFound(message),
            422 => ServiceError::QueryRejected(message),
            _ => ServiceError::Internal(message),
        }
    }
}

/// One request in, one response body out. Handlers hold no per-request state.
pub trait Service: Send + Sync {
    fn handle(&self, endpoint: Endpoint, body: &[u8]) -> Result<Vec<u8>, ServiceError>;
}

pub(crate) fn parse<T: DeserializeOwned>(body: &[u8]) -> Result<T, ServiceError> {
    serde_json::from_slice(body).map_err(|e| ServiceError::BadRequest(e.to_string()))
}

pub(crate) fn respond<T: Serialize>(value: &T) -> Result<Vec<u8>, ServiceError> {
    serde_json::to_vec(value).map_err(|e| ServiceError::Internal(e.to_string()))
}

/// Behaviours are written `MODE` or `MODE:arg` on the command line and in reports.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown behaviour `{0}`")]
pub struct BehaviorParseError(pub String);

pub(crate) fn split_mode(s: &str) -> (&str, Option<&str>) {
    match s.split_once(':') {
        Some((m, a)) => (m, Some(a)),
        None => (s, None),
    }
}

pub(crate) fn arg<T: FromStr>(s: &str, a: Option<&str>) -> Result<T, BehaviorParseError> {
    a.and_then(|a| a.trim_start_matches('+').parse().ok()).ok_or_else(|| BehaviorParseError(s.to_string()))
}
