use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::Endpoint;
use crate::auth::BearerToken;
use crate::error::Error;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Request {
    pub endpoint: Endpoint,
    /// Header names are stored lower-case.
    #[serde(default)]
    pub headers: BTreeMap<String, String>,
    #[serde(default)]
    pub path_params: BTreeMap<String, String>,
    #[serde(default)]
    pub query: BTreeMap<String, String>,
    #[serde(default)]
    pub body: Value,
}

impl Request {
    pub fn new(endpoint: Endpoint) -> Self {
        Self {
            endpoint,
            headers: BTreeMap::new(),
            path_params: BTreeMap::new(),
            query: BTreeMap::new(),
            body: Value::Null,
        }
    }

    pub fn bearer(self, token: &BearerToken) -> Self {
        self.bearer_str(token.as_str())
    }

    pub fn bearer_str(self, token: &str) -> Self {
        self.header("authorization", format!("Bearer {token}"))
    }

    pub fn header(mut self, name: &str, value: impl Into<String>) -> Self {
        self.headers.insert(name.to_ascii_lowercase(), value.into());
        self
    }

    pub fn param(mut self, name: &str, value: impl ToString) -> Self {
        self.path_params.insert(name.to_owned(), value.to_string());
        self
    }

    pub fn query(mut self, name: &str, value: impl ToString) -> Self {
        self.query.insert(name.to_owned(), value.to_string());
        self
    }

    pub fn body(mut self, body: Value) -> Self {
        self.body = body;
        self
    }

    /// The token from an `Authorization: Bearer <token>` header.
    pub fn bearer_token(&self) -> Option<&str> {
        let v = self.headers.get("authorization")?;
        let (scheme, token) = v.trim().split_once(' ')?;
        scheme.eq_ignore_ascii_case("bearer").then(|| token.trim()).filter(|t| !t.is_empty())
    }

    pub fn path(&self) -> String {
        let mut p = self.endpoint.path(&self.path_params);
        if !self.query.is_empty() {
            let q: Vec<String> = self.query.iter().map(|(k, v)| format!("{k}={v}")).collect();
            p.push('?');
            p.push_str(&q.join("&"));
        }
        p
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Response {
    pub status: u16,
    pub body: Value,
    #[serde(default)]
    pub headers: BTreeMap<String, String>,
}

impl Response {
    pub fn ok(body: Value) -> Self {
        Self { status: 200, body, headers: BTreeMap::new() }
    }

    pub fn status(status: u16, message: &str) -> Self {
        Self { status, body: json!({ "error": message }), headers: BTreeMap::new() }
    }

    pub fn not_found_route() -> Self {
        Self::status(404, "no such endpoint")
    }

    pub fn is_success(&self) -> bool {
        self.status == 200
    }

    pub fn with_header(mut self, name: &str, value: impl Into<String>) -> Self {
        self.headers.insert(name.to_owned(), value.into());
        self
    }

    /// `(status, body)`, the part of a response that must not depend on the runtime.
    pub fn outcome(&self) -> (u16, &Value) {
        (self.status, &self.body)
    }
}

impl From<Error> for Response {
    fn from(e: Error) -> Self {
        let body = match &e {
            Error::Unauthorized => json!({ "error": "unauthorized" }),
            Error::Forbidden => json!({ "error": "forbidden" }),
            Error::NotFound(d) => json!({ "error": "not_found", "detail": d }),
            Error::Conflict(d) => json!({ "error": "conflict", "detail": d }),
            Error::Invalid(d) => json!({ "error": "invalid", "detail": d }),
            Error::Schema(m) => json!({
                "error": "schema_mismatch",
                "expected": m.expected,
                "found": m.found,
                "position": m.position,
            }),
            Error::Storage(d) => json!({ "error": "storage", "detail": d }),
        };
        Self { status: e.status(), body, headers: BTreeMap::new() }
    }
}
