use std::fmt;

use serde::Serialize;

use crate::model::ScalarKind;

/// Failure of a platform operation. Every variant maps onto exactly one HTTP
/// status so that all runtimes report failures identically.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("unauthorized")]
    Unauthorized,
    #[error("forbidden")]
    Forbidden,
    #[error("not found: {0}")]
    NotFound(String),
    #[error("conflict: {0}")]
    Conflict(String),
    #[error("invalid: {0}")]
    Invalid(String),
    #[error("payload does not match schema: {0}")]
    Schema(SchemaMismatch),
    #[error("storage: {0}")]
    Storage(String),
}

impl Error {
    pub fn status(&self) -> u16 {
        match self {
            Error::Unauthorized => 401,
            Error::Forbidden => 403,
            Error::NotFound(_) => 404,
            Error::Conflict(_) => 409,
            Error::Invalid(_) | Error::Schema(_) => 400,
            Error::Storage(_) => 500,
        }
    }

    pub(crate) fn not_found(what: &str, id: u64) -> Self {
        Error::NotFound(format!("{what} {id}"))
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Storage(e.to_string())
    }
}

/// What a payload looked like at the point where it stopped matching its schema.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FoundKind {
    String,
    Integer,
    Float,
    Bool,
    Null,
    Array,
    Object,
}

impl FoundKind {
    pub fn of(value: &serde_json::Value) -> Self {
        use serde_json::Value;
        match value {
            Value::String(_) => FoundKind::String,
            Value::Number(n) if n.is_f64() => FoundKind::Float,
            Value::Number(_) => FoundKind::Integer,
            Value::Bool(_) => FoundKind::Bool,
            Value::Null => FoundKind::Null,
            Value::Array(_) => FoundKind::Array,
            Value::Object(_) => FoundKind::Object,
        }
    }
}

/// Expected shape at the mismatch point: a scalar kind, or a container.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Expected {
    Scalar(ScalarKind),
    Tuple { arity: usize },
    Array,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SchemaMismatch {
    pub expected: Expected,
    pub found: FoundKind,
    /// Element index inside a tuple or array; `None` for the top level.
    pub position: Option<usize>,
}

impl fmt::Display for SchemaMismatch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "expected {:?}, found {:?}", self.expected, self.found)?;
        if let Some(p) = self.position {
            write!(f, " at position {p}")?;
        }
        Ok(())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
