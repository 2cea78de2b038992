//! Dummy users and their data, provisioned through the public API so that
//! load runs have valid ids and tokens to draw from.

use std::collections::BTreeMap;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::transport::{Transport, TransportError};
use crate::api::{Endpoint, Request, Response};
use crate::auth::BearerToken;
use crate::clock::Micros;

pub const DEFAULT_FIXTURE_COUNT: usize = 50;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixtureUser {
    pub user_id: u64,
    pub username: String,
    pub password: String,
    pub token: BearerToken,
    pub device_id: u64,
    pub device_token: BearerToken,
    pub sensor_id: u64,
    pub consumer_id: u64,
    pub consumer_token: BearerToken,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fixtures {
    pub issued_at: Micros,
    pub admin_token: BearerToken,
    pub users: Vec<FixtureUser>,
}

#[derive(Debug, thiserror::Error)]
pub enum SeedError {
    #[error(transparent)]
    Transport(#[from] TransportError),
    #[error("{step} answered {status}: {body}")]
    Unexpected { step: String, status: u16, body: Value },
    #[error("fixtures file: {0}")]
    Io(String),
}

impl Fixtures {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, SeedError> {
        let path = path.as_ref();
        let text =
            std::fs::read_to_string(path).map_err(|e| SeedError::Io(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| SeedError::Io(format!("{}: {e}", path.display())))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), SeedError> {
        let path = path.as_ref();
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir).map_err(|e| SeedError::Io(e.to_string()))?;
        }
        let text = serde_json::to_string_pretty(self).expect("fixtures serialize");
        std::fs::write(path, text).map_err(|e| SeedError::Io(format!("{}: {e}", path.display())))
    }
}

pub fn fixture_username(i: usize) -> String {
    format!("fixture-{i:04}")
}

fn fixture_password(i: usize) -> String {
    format!("fixture-pw-{i:04}")
}

async fn expect_ok<T: Transport>(t: &T, step: &str, request: Request) -> Result<Value, SeedError> {
    let r = t.call(request).await?;
    if r.status == 200 {
        Ok(r.body)
    } else {
        Err(unexpected(step, r))
    }
}

fn unexpected(step: &str, r: Response) -> SeedError {
    SeedError::Unexpected { step: step.to_owned(), status: r.status, body: r.body }
}

fn id_of(body: &Value) -> u64 {
    body["id"].as_u64().unwrap_or_default()
}

fn token_of(body: &Value) -> BearerToken {
    BearerToken::new(body["token"].as_str().unwrap_or_default())
}

async fn signin<T: Transport>(
    t: &T,
    username: &str,
    password: &str,
) -> Result<Option<BearerToken>, SeedError> {
    let r = t
        .call(Request::new(Endpoint::UsersSignin).body(json!({"username": username, "password": password})))
        .await?;
    match r.status {
        200 => Ok(Some(token_of(&r.body))),
        401 => Ok(None),
        _ => Err(unexpected("users-signin", r)),
    }
}

/// Provisions `count` users, each with one device, one float sensor and one
/// consumer granted that sensor. Entities that already exist (by fixture
/// username, or by the ids in `previous`) are reused.
pub async fn seed<T: Transport>(
    t: &T,
    count: usize,
    admin: (&str, &str),
    previous: Option<&Fixtures>,
    issued_at: Micros,
) -> Result<Fixtures, SeedError> {
    let admin_token = signin(t, admin.0, admin.1).await?.ok_or_else(|| SeedError::Unexpected {
        step: "admin signin".into(),
        status: 401,
        body: json!({"error": "unauthorized"}),
    })?;
    let listed = expect_ok(t, "users-get", Request::new(Endpoint::UsersGet).bearer(&admin_token)).await?;
    let mut ids: BTreeMap<String, u64> = listed
        .as_array()
        .into_iter()
        .flatten()
        .filter_map(|u| Some((u["username"].as_str()?.to_owned(), u["id"].as_u64()?)))
        .collect();
    let prev: BTreeMap<&str, &FixtureUser> =
        previous.map(|f| f.users.iter().map(|u| (u.username.as_str(), u)).collect()).unwrap_or_default();

    let mut users = Vec::with_capacity(count);
    for i in 0..count {
        let username = fixture_username(i);
        let password = fixture_password(i);
        if !ids.contains_key(&username) {
            let body = expect_ok(
                t,
                "users-add",
                Request::new(Endpoint::UsersAdd).bearer(&admin_token).body(json!({
                    "name": format!("Fixture {i}"),
                    "username": username,
                    "password": password,
                })),
            )
            .await?;
            ids.insert(username.clone(), id_of(&body));
        }
        let user_id = ids[&username];
        let token = signin(t, &username, &password).await?.ok_or_else(|| SeedError::Unexpected {
            step: format!("signin {username}"),
            status: 401,
            body: Value::Null,
        })?;

        let devices = expect_ok(t, "devices-get", Request::new(Endpoint::DevicesGet).bearer(&token)).await?;
        let device_id = match devices.get(0).and_then(|d| d["id"].as_u64()) {
            Some(id) => id,
            None => id_of(
                &expect_ok(
                    t,
                    "devices-add",
                    Request::new(Endpoint::DevicesAdd).bearer(&token).body(json!({"name": "fixture-device"})),
                )
                .await?,
            ),
        };

        let sensors = expect_ok(
            t,
            "sensors-get",
            Request::new(Endpoint::SensorsGet).bearer(&token).param("id", device_id),
        )
        .await?;
        let sensor_id = match sensors.get(0).and_then(|s| s["id"].as_u64()) {
            Some(id) => id,
            None => id_of(
                &expect_ok(
                    t,
                    "sensors-add",
                    Request::new(Endpoint::SensorsAdd)
                        .bearer(&token)
                        .param("id", device_id)
                        .body(json!({"name": "temperature", "schema": {"kind": "float"}})),
                )
                .await?,
            ),
        };

        let mut consumer = None;
        if let Some(p) = prev.get(username.as_str()).filter(|p| p.user_id == user_id) {
            let r = t
                .call(Request::new(Endpoint::ConsumerKeyGet).bearer(&token).param("id", p.consumer_id))
                .await?;
            if r.status == 200 {
                consumer = Some((p.consumer_id, token_of(&r.body)));
            }
        }
        let (consumer_id, consumer_token) = match consumer {
            Some(c) => c,
            None => {
                let body = expect_ok(
                    t,
                    "consumers-add",
                    Request::new(Endpoint::ConsumersAdd)
                        .bearer(&token)
                        .body(json!({"name": "fixture-consumer"})),
                )
                .await?;
                let id = id_of(&body);
                let key = expect_ok(
                    t,
                    "consumer-key-get",
                    Request::new(Endpoint::ConsumerKeyGet).bearer(&token).param("id", id),
                )
                .await?;
                (id, token_of(&key))
            }
        };
        expect_ok(
            t,
            "consumer-sensor-enable",
            Request::new(Endpoint::ConsumerSensorEnable)
                .bearer(&token)
                .param("id", consumer_id)
                .param("sid", sensor_id),
        )
        .await?;
        let device_token = token_of(
            &expect_ok(
                t,
                "device-key-get",
                Request::new(Endpoint::DeviceKeyGet).bearer(&token).param("id", device_id),
            )
            .await?,
        );
        users.push(FixtureUser {
            user_id,
            username,
            password,
            token,
            device_id,
            device_token,
            sensor_id,
            consumer_id,
            consumer_token,
        });
    }
    Ok(Fixtures { issued_at, admin_token, users })
}

/// Builds load requests for one endpoint from fixtures.
#[derive(Debug, Clone)]
pub struct RequestFactory<'a> {
    fixtures: &'a Fixtures,
    endpoint: Endpoint,
    nonce: u64,
    lane: u64,
    counter: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{0} needs fixture users but none were provisioned")]
pub struct NoFixtures(pub Endpoint);

impl<'a> RequestFactory<'a> {
    /// `nonce` keeps generated usernames unique across runs.
    pub fn new(fixtures: &'a Fixtures, endpoint: Endpoint, nonce: u64) -> Result<Self, NoFixtures> {
        let needs_users = !matches!(endpoint, Endpoint::UsersAdd | Endpoint::UsersGet);
        if needs_users && fixtures.users.is_empty() {
            return Err(NoFixtures(endpoint));
        }
        Ok(Self { fixtures, endpoint, nonce, lane: 0, counter: 0 })
    }

    /// Separates the generated names of concurrent factories sharing a nonce.
    pub fn lane(mut self, lane: u64) -> Self {
        self.lane = lane;
        self
    }

    pub fn build<R: Rng>(&mut self, rng: &mut R) -> Request {
        self.counter += 1;
        let e = self.endpoint;
        let admin = &self.fixtures.admin_token;
        let pick = |rng: &mut R| -> &'a FixtureUser {
            &self.fixtures.users[rng.random_range(0..self.fixtures.users.len())]
        };
        match e {
            Endpoint::UsersAdd => {
                let name = format!("load-{:x}-{}-{}", self.nonce, self.lane, self.counter);
                Request::new(e)
                    .bearer(admin)
                    .body(json!({"name": name, "username": name, "password": "load-pw"}))
            }
            Endpoint::UsersGet => Request::new(e).bearer(admin),
            Endpoint::UsersSignin => {
                let u = pick(rng);
                Request::new(e).body(json!({"username": u.username, "password": u.password}))
            }
            Endpoint::DevicesAdd => Request::new(e)
                .bearer(&pick(rng).token)
                .body(json!({"name": format!("load-device-{}", self.counter)})),
            Endpoint::DevicesGet => Request::new(e).bearer(&pick(rng).token),
            Endpoint::DeviceKeyGet | Endpoint::SensorsGet => {
                let u = pick(rng);
                Request::new(e).bearer(&u.token).param("id", u.device_id)
            }
            Endpoint::SensorsAdd => {
                let u = pick(rng);
                Request::new(e).bearer(&u.token).param("id", u.device_id).body(
                    json!({"name": format!("load-sensor-{}", self.counter), "schema": {"kind": "float"}}),
                )
            }
            Endpoint::ConsumersAdd => Request::new(e)
                .bearer(&pick(rng).token)
                .body(json!({"name": format!("load-consumer-{}", self.counter)})),
            Endpoint::ConsumerSensorEnable => {
                let u = pick(rng);
                Request::new(e).bearer(&u.token).param("id", u.consumer_id).param("sid", u.sensor_id)
            }
            Endpoint::ConsumerKeyGet => {
                let u = pick(rng);
                Request::new(e).bearer(&u.token).param("id", u.consumer_id)
            }
            Endpoint::ConsumersConsumeGet => {
                let u = pick(rng);
                Request::new(e).bearer(&u.consumer_token).param("sensor_id", u.sensor_id)
            }
            Endpoint::GatewayIngest => {
                let u = pick(rng);
                let reading: f64 = 15.0 + rng.random::<f64>() * 10.0;
                Request::new(e)
                    .bearer(&u.device_token)
                    .body(json!({"sensor_id": u.sensor_id, "payload": reading}))
            }
        }
    }
}
