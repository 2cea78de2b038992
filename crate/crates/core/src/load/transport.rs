use std::future::Future;
use std::sync::Arc;

use crate::api::{self, Request, Response};
use crate::clock::Clock;
use crate::platform::Platform;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TransportError {
    #[error("connection failed: {0}")]
    Connect(String),
    #[error("request failed: {0}")]
    Request(String),
}

/// Something that answers API requests.
pub trait Transport: Send + Sync {
    fn call(&self, request: Request) -> impl Future<Output = Result<Response, TransportError>> + Send;
}

/// Calls the handlers in-process, stamped with the given clock.
#[derive(Clone)]
pub struct InProcess {
    platform: Platform,
    clock: Arc<dyn Clock>,
}

impl InProcess {
    pub fn new(platform: Platform, clock: Arc<dyn Clock>) -> Self {
        Self { platform, clock }
    }
}

impl Transport for InProcess {
    async fn call(&self, request: Request) -> Result<Response, TransportError> {
        Ok(api::dispatch(&self.platform, &request, self.clock.now()))
    }
}

/// Calls a running server over HTTP.
#[derive(Debug, Clone)]
pub struct Http {
    client: reqwest::Client,
    base: String,
}

impl Http {
    pub fn new(base: impl Into<String>) -> Self {
        Self { client: reqwest::Client::new(), base: base.into().trim_end_matches('/').to_owned() }
    }

    pub fn base(&self) -> &str {
        &self.base
    }

    /// Body of `GET /healthz`, if the server answers.
    pub async fn health(&self) -> Option<serde_json::Value> {
        let resp = self.client.get(format!("{}/healthz", self.base)).send().await.ok()?;
        resp.json().await.ok()
    }
}

fn classify(e: reqwest::Error) -> TransportError {
    if e.is_connect() {
        TransportError::Connect(e.to_string())
    } else {
        TransportError::Request(e.to_string())
    }
}

impl Transport for Http {
    async fn call(&self, request: Request) -> Result<Response, TransportError> {
        let method = reqwest::Method::from_bytes(request.endpoint.method().as_str().as_bytes())
            .expect("endpoint methods are valid");
        let mut builder = self.client.request(method, format!("{}{}", self.base, request.path()));
        for (k, v) in &request.headers {
            builder = builder.header(k, v);
        }
        if !request.body.is_null() {
            builder = builder.json(&request.body);
        }
        let resp = builder.send().await.map_err(classify)?;
        let status = resp.status().as_u16();
        let headers = resp
            .headers()
            .iter()
            .filter_map(|(k, v)| Some((k.as_str().to_owned(), v.to_str().ok()?.to_owned())))
            .collect();
        let bytes = resp.bytes().await.map_err(classify)?;
        let body = if bytes.is_empty() {
            serde_json::Value::Null
        } else {
            serde_json::from_slice(&bytes)
                .unwrap_or_else(|_| serde_json::Value::String(String::from_utf8_lossy(&bytes).into_owned()))
        };
        Ok(Response { status, body, headers })
    }
}
