//! Endpoint handlers, split into an auth stage and a controller stage so a
//! runtime can run them chained inside one process, as two sequenced
//! functions, or fused into one function.

mod endpoint;
mod message;

pub use endpoint::{AuthKind, Endpoint, Method, UnknownEndpoint};
pub use message::{Request, Response};

use serde_json::{json, Value};

use crate::auth::{self, Claims, SubjectKind, TokenAuthority};
use crate::clock::Micros;
use crate::error::{Error, Result};
use crate::model::{ConsumerId, DeviceId, PayloadSchema, Role, SensorId, UserId};
use crate::pipeline::{validate_payload, SensorReading};
use crate::platform::Platform;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Stage {
    Auth,
    Controller,
    Fused,
}

/// One deployable piece of request handling.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct HandlerUnit {
    pub name: String,
    pub stage: Stage,
    pub endpoint: Option<Endpoint>,
}

/// Result of invoking a unit: either hand the (optional) claims on to the
/// next unit in the chain, or answer the request.
#[derive(Debug, Clone, PartialEq)]
pub enum UnitOutput {
    Continue(Option<Claims>),
    Respond(Response),
}

pub const AUTH_UNIT: &str = "auth";

impl HandlerUnit {
    /// The shared authentication unit. It serves every endpoint.
    pub fn auth() -> Self {
        Self { name: AUTH_UNIT.to_owned(), stage: Stage::Auth, endpoint: None }
    }

    pub fn controller(endpoint: Endpoint) -> Self {
        Self { name: endpoint.slug().to_owned(), stage: Stage::Controller, endpoint: Some(endpoint) }
    }

    pub fn fused(endpoint: Endpoint) -> Self {
        Self { name: endpoint.slug().to_owned(), stage: Stage::Fused, endpoint: Some(endpoint) }
    }

    pub fn invoke(
        &self,
        platform: &Platform,
        request: &Request,
        claims: Option<Claims>,
        now: Micros,
    ) -> UnitOutput {
        match self.stage {
            Stage::Auth => match authenticate(platform.tokens(), request, now) {
                Ok(c) => UnitOutput::Continue(c),
                Err(e) => UnitOutput::Respond(e.into()),
            },
            Stage::Controller => UnitOutput::Respond(control(platform, request, claims.as_ref(), now)),
            Stage::Fused => UnitOutput::Respond(dispatch(platform, request, now)),
        }
    }
}

/// Auth stage: checks the bearer token against the kind the endpoint
/// requires. Reads nothing but the request and the signing secret.
pub fn authenticate(tokens: &TokenAuthority, request: &Request, now: Micros) -> Result<Option<Claims>> {
    let kind = match request.endpoint.auth_kind() {
        AuthKind::None => return Ok(None),
        AuthKind::User => SubjectKind::User,
        AuthKind::Device => SubjectKind::Device,
        AuthKind::Consumer => SubjectKind::Consumer,
    };
    let token = request.bearer_token().ok_or(Error::Unauthorized)?;
    tokens.verify_str(token, kind, now).map(Some)
}

/// Runs the full chain for one request inside the caller's process.
pub fn dispatch(platform: &Platform, request: &Request, now: Micros) -> Response {
    match authenticate(platform.tokens(), request, now) {
        Ok(claims) => control(platform, request, claims.as_ref(), now),
        Err(e) => e.into(),
    }
}

/// Stateless HTTP ingestion: device token, ownership, schema, publish.
pub fn gateway_ingest(platform: &Platform, request: &Request, now: Micros) -> Response {
    debug_assert_eq!(request.endpoint, Endpoint::GatewayIngest);
    dispatch(platform, request, now)
}

/// Controller stage: executes the endpoint given already-verified claims.
pub fn control(platform: &Platform, request: &Request, claims: Option<&Claims>, now: Micros) -> Response {
    match run_controller(platform, request, claims, now) {
        Ok(body) => Response::ok(body),
        Err(e) => e.into(),
    }
}

fn require(claims: Option<&Claims>) -> Result<&Claims> {
    claims.ok_or(Error::Unauthorized)
}

fn str_field<'a>(body: &'a Value, name: &str) -> Result<&'a str> {
    body.get(name)
        .and_then(Value::as_str)
        .ok_or_else(|| Error::Invalid(format!("missing string field {name}")))
}

fn id_param(request: &Request, name: &str) -> Result<u64> {
    request
        .path_params
        .get(name)
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| Error::Invalid(format!("path parameter {name} must be an integer id")))
}

fn run_controller(
    platform: &Platform,
    request: &Request,
    claims: Option<&Claims>,
    now: Micros,
) -> Result<Value> {
    let store = platform.store();
    let body = &request.body;
    match request.endpoint {
        Endpoint::UsersAdd => {
            let actor = require(claims)?;
            let role = match body.get("role").and_then(Value::as_str) {
                None | Some("user") => Role::User,
                Some("admin") => Role::Admin,
                Some(other) => return Err(Error::Invalid(format!("unknown role {other}"))),
            };
            let id = store.create_user(
                actor,
                body.get("name").and_then(Value::as_str).unwrap_or_default(),
                str_field(body, "username")?,
                str_field(body, "password")?,
                role,
            )?;
            Ok(json!({ "id": id }))
        }
        Endpoint::UsersSignin => {
            let token = auth::signin(
                store,
                platform.tokens(),
                str_field(body, "username")?,
                str_field(body, "password")?,
                now,
            )?;
            Ok(json!({ "token": token }))
        }
        Endpoint::UsersGet => {
            let users = store.list_users(require(claims)?)?;
            Ok(Value::Array(
                users
                    .into_iter()
                    .map(|u| json!({ "id": u.id, "name": u.name, "username": u.username, "role": u.role }))
                    .collect(),
            ))
        }
        Endpoint::DevicesAdd => {
            let id = store.create_device(require(claims)?, str_field(body, "name")?)?;
            Ok(json!({ "id": id }))
        }
        Endpoint::DevicesGet => {
            Ok(serde_json::to_value(store.list_devices(require(claims)?)?).expect("devices serialize"))
        }
        Endpoint::DeviceKeyGet => {
            let device = DeviceId(id_param(request, "id")?);
            let token = auth::device_key(store, platform.tokens(), require(claims)?, device, now)?;
            Ok(json!({ "token": token }))
        }
        Endpoint::SensorsAdd => {
            let actor = require(claims)?;
            let device = DeviceId(id_param(request, "id")?);
            let schema: PayloadSchema = body
                .get("schema")
                .cloned()
                .map(serde_json::from_value)
                .transpose()
                .map_err(|e| Error::Invalid(format!("schema: {e}")))?
                .ok_or_else(|| Error::Invalid("missing field schema".into()))?;
            let id = platform.create_sensor(actor, device, str_field(body, "name")?, schema)?;
            Ok(json!({ "id": id }))
        }
        Endpoint::SensorsGet => {
            let device = DeviceId(id_param(request, "id")?);
            Ok(serde_json::to_value(store.list_sensors(require(claims)?, device)?)
                .expect("sensors serialize"))
        }
        Endpoint::ConsumersAdd => {
            let id = store.create_consumer(require(claims)?, str_field(body, "name")?)?;
            Ok(json!({ "id": id }))
        }
        Endpoint::ConsumerSensorEnable => {
            let consumer = ConsumerId(id_param(request, "id")?);
            let sensor = SensorId(id_param(request, "sid")?);
            store.enable_consumer_sensor(require(claims)?, consumer, sensor)?;
            Ok(json!({ "consumer_id": consumer, "sensor_id": sensor, "enabled": true }))
        }
        Endpoint::ConsumerKeyGet => {
            let consumer = ConsumerId(id_param(request, "id")?);
            let token = auth::consumer_key(store, platform.tokens(), require(claims)?, consumer, now)?;
            Ok(json!({ "token": token }))
        }
        Endpoint::ConsumersConsumeGet => {
            let actor = require(claims)?;
            if actor.subject_kind != SubjectKind::Consumer {
                return Err(Error::Unauthorized);
            }
            let sensor = SensorId(id_param(request, "sensor_id")?);
            store.sensor(sensor)?;
            if !store.has_grant(ConsumerId(actor.subject_id), sensor) {
                return Err(Error::Forbidden);
            }
            let limit = match request.query.get("limit") {
                Some(v) => Some(
                    v.parse::<usize>()
                        .map_err(|_| Error::Invalid("limit must be a non-negative integer".into()))?,
                ),
                None => None,
            };
            if platform.sync_read() {
                platform.pipeline().drain(sensor, usize::MAX)?;
            }
            let readings = platform.pipeline().query(sensor, limit)?;
            Ok(serde_json::to_value(readings).expect("readings serialize"))
        }
        Endpoint::GatewayIngest => ingest(platform, request, require(claims)?, now),
    }
}

fn optional_id(body: &Value, name: &str) -> Result<Option<u64>> {
    match body.get(name) {
        None | Some(Value::Null) => Ok(None),
        Some(v) => {
            v.as_u64().map(Some).ok_or_else(|| Error::Invalid(format!("{name} must be an integer id")))
        }
    }
}

fn ingest(platform: &Platform, request: &Request, device: &Claims, now: Micros) -> Result<Value> {
    if device.subject_kind != SubjectKind::Device {
        return Err(Error::Unauthorized);
    }
    let body = &request.body;
    let sensor_id = optional_id(body, "sensor_id")?
        .map(SensorId)
        .ok_or_else(|| Error::Invalid("missing field sensor_id".into()))?;
    let sensor = platform.store().sensor(sensor_id)?;
    if sensor.device_id.0 != device.subject_id {
        return Err(Error::Forbidden);
    }
    if optional_id(body, "device_id")?.is_some_and(|d| d != device.subject_id) {
        return Err(Error::Forbidden);
    }
    if let Some(user) = optional_id(body, "user_id")? {
        let owner = platform.store().device(sensor.device_id)?.owner_user_id;
        if owner != UserId(user) {
            return Err(Error::Forbidden);
        }
    }
    let payload = body.get("payload").ok_or_else(|| Error::Invalid("missing field payload".into()))?;
    validate_payload(&sensor.schema, payload).map_err(Error::Schema)?;
    let timestamp = optional_id(body, "timestamp")?.unwrap_or_else(|| now.as_millis());
    let offset = platform
        .pipeline()
        .publish(sensor_id, SensorReading { sensor_id, timestamp, payload: payload.clone() })?;
    Ok(json!({ "offset": offset }))
}
