//! HTTP front end: maps routes onto the runtime and holds each response for
//! the latency the runtime modeled.

use std::collections::BTreeMap;
use std::future::Future;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Query, State};
use axum::http::{HeaderMap, HeaderName, HeaderValue, Method, StatusCode, Uri};
use axum::response::{IntoResponse, Response as HttpResponse};
use axum::routing::get;
use axum::{Json, Router};
use serde_json::{json, Value};
use tokio::net::TcpListener;

use crate::api::{Endpoint, Request, Response};
use crate::clock::Clock;
use crate::runtime::Runtime;

#[derive(Clone)]
struct AppState {
    runtime: Arc<Runtime>,
    clock: Arc<dyn Clock>,
    hold_latency: bool,
}

/// Builds the router. With `hold_latency` each response is delayed by the
/// latency the runtime attributes to it.
pub fn router(runtime: Arc<Runtime>, clock: Arc<dyn Clock>, hold_latency: bool) -> Router {
    Router::new().route("/healthz", get(healthz)).fallback(route).with_state(AppState {
        runtime,
        clock,
        hold_latency,
    })
}

async fn healthz(State(state): State<AppState>) -> Json<Value> {
    Json(json!({"status": "ok", "mode": state.runtime.mode().as_str()}))
}

async fn route(
    State(state): State<AppState>,
    method: Method,
    uri: Uri,
    headers: HeaderMap,
    body: Bytes,
) -> HttpResponse {
    let Some((endpoint, params)) = Endpoint::resolve(method.as_str(), uri.path()) else {
        return to_http(Response::not_found_route());
    };
    let query: BTreeMap<String, String> = match Query::try_from_uri(&uri) {
        Ok(Query(q)) => q,
        Err(_) => return to_http(Response::status(400, "malformed query string")),
    };
    let body = if body.is_empty() {
        Value::Null
    } else {
        match serde_json::from_slice(&body) {
            Ok(v) => v,
            Err(_) => return to_http(Response::status(400, "body is not valid JSON")),
        }
    };
    let request = Request {
        endpoint,
        headers: headers
            .iter()
            .filter_map(|(k, v)| Some((k.as_str().to_ascii_lowercase(), v.to_str().ok()?.to_owned())))
            .collect(),
        path_params: params,
        query,
        body,
    };
    let now = state.clock.now();
    let runtime = state.runtime.clone();
    let routed = tokio::task::spawn_blocking(move || runtime.handle(&request, now))
        .await
        .expect("runtime handler panicked");
    if state.hold_latency {
        tokio::time::sleep(routed.latency.into()).await;
    }
    to_http(routed.response)
}

fn to_http(r: Response) -> HttpResponse {
    let status = StatusCode::from_u16(r.status).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
    let mut out = (status, Json(r.body)).into_response();
    for (k, v) in r.headers {
        if let (Ok(k), Ok(v)) = (HeaderName::try_from(k), HeaderValue::try_from(v)) {
            out.headers_mut().insert(k, v);
        }
    }
    out
}

/// Serves until `shutdown` resolves.
pub async fn serve(
    listener: TcpListener,
    runtime: Arc<Runtime>,
    clock: Arc<dyn Clock>,
    hold_latency: bool,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    axum::serve(listener, router(runtime, clock, hold_latency)).with_graceful_shutdown(shutdown).await
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::auth::{BearerToken, Claims};
    use crate::clock::SystemClock;
    use crate::load::{Http, Transport};
    use crate::model::Role;
    use crate::platform::Platform;
    use crate::runtime::{DeploymentConfig, Mode};

    async fn start(mode: Mode) -> (String, BearerToken, tokio::sync::oneshot::Sender<()>) {
        let platform = Platform::in_memory(b"http-secret");
        let admin = platform.bootstrap_admin("admin", "pw").unwrap();
        let clock = Arc::new(SystemClock);
        let token = platform.tokens().issue(Claims::user(admin, Role::Admin, clock.now().as_secs()));
        let runtime = Arc::new(Runtime::new(platform, DeploymentConfig::default().with_mode(mode)));
        let listener = TcpListener::bind("127.0.0.1:0").await.unwrap();
        let addr = listener.local_addr().unwrap();
        let (tx, rx) = tokio::sync::oneshot::channel();
        tokio::spawn(serve(listener, runtime, clock, false, async {
            let _ = rx.await;
        }));
        (format!("http://{addr}"), token, tx)
    }

    #[tokio::test]
    async fn healthz_and_routing() {
        let (base, token, _stop) = start(Mode::FaasFused).await;
        let health = reqwest::get(format!("{base}/healthz")).await.unwrap();
        assert_eq!(health.status(), 200);

        let http = Http::new(&base);
        let r = http
            .call(Request::new(Endpoint::DevicesAdd).bearer(&token).body(json!({"name": "d"})))
            .await
            .unwrap();
        assert_eq!((r.status, r.body.clone()), (200, json!({"id": 1})));
        assert_eq!(r.headers["x-runtime-mode"], "faas-fused");
        assert_eq!(r.headers["x-cold-start"], "true");

        let r = http
            .call(Request::new(Endpoint::ConsumersConsumeGet).bearer(&token).param("sensor_id", 1))
            .await
            .unwrap();
        assert_eq!(r.status, 401);

        let missing = reqwest::get(format!("{base}/nope")).await.unwrap();
        assert_eq!(missing.status(), 404);
        let bad_json = reqwest::Client::new()
            .post(format!("{base}/devices"))
            .header("authorization", format!("Bearer {}", token.as_str()))
            .body("{not json")
            .send()
            .await
            .unwrap();
        assert_eq!(bad_json.status(), 400);
    }
}
