use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Token kind an endpoint demands before its controller runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AuthKind {
    None,
    /// Any user token; admin-only endpoints check the role in the controller.
    User,
    Device,
    Consumer,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Endpoint {
    UsersAdd,
    UsersSignin,
    UsersGet,
    DevicesAdd,
    DevicesGet,
    DeviceKeyGet,
    SensorsAdd,
    SensorsGet,
    ConsumersAdd,
    ConsumerSensorEnable,
    ConsumerKeyGet,
    ConsumersConsumeGet,
    GatewayIngest,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    Get,
    Post,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Get => "GET",
            Method::Post => "POST",
        }
    }
}

impl Endpoint {
    pub const ALL: [Endpoint; 13] = [
        Endpoint::UsersAdd,
        Endpoint::UsersSignin,
        Endpoint::UsersGet,
        Endpoint::DevicesAdd,
        Endpoint::DevicesGet,
        Endpoint::DeviceKeyGet,
        Endpoint::SensorsAdd,
        Endpoint::SensorsGet,
        Endpoint::ConsumersAdd,
        Endpoint::ConsumerSensorEnable,
        Endpoint::ConsumerKeyGet,
        Endpoint::ConsumersConsumeGet,
        Endpoint::GatewayIngest,
    ];

    /// (method, path template, auth kind)
    pub fn route(self) -> (Method, &'static str, AuthKind) {
        use Endpoint::*;
        use Method::*;
        match self {
            UsersAdd => (Post, "/users", AuthKind::User),
            UsersSignin => (Post, "/users/signin", AuthKind::None),
            UsersGet => (Get, "/users", AuthKind::User),
            DevicesAdd => (Post, "/devices", AuthKind::User),
            DevicesGet => (Get, "/devices", AuthKind::User),
            DeviceKeyGet => (Get, "/devices/{id}/key", AuthKind::User),
            SensorsAdd => (Post, "/devices/{id}/sensors", AuthKind::User),
            SensorsGet => (Get, "/devices/{id}/sensors", AuthKind::User),
            ConsumersAdd => (Post, "/consumers", AuthKind::User),
            ConsumerSensorEnable => (Post, "/consumers/{id}/sensors/{sid}", AuthKind::User),
            ConsumerKeyGet => (Get, "/consumers/{id}/key", AuthKind::User),
            ConsumersConsumeGet => (Get, "/consume/{sensor_id}", AuthKind::Consumer),
            GatewayIngest => (Post, "/gateway/http", AuthKind::Device),
        }
    }

    pub fn method(self) -> Method {
        self.route().0
    }

    pub fn auth_kind(self) -> AuthKind {
        self.route().2
    }

    /// Endpoints deployed as an auth function chained to a controller function
    /// in sequenced mode. The rest verify their own token inline.
    pub fn is_sequenced(self) -> bool {
        self.auth_kind() == AuthKind::User
    }

    pub fn slug(self) -> &'static str {
        use Endpoint::*;
        match self {
            UsersAdd => "users-add",
            UsersSignin => "users-signin",
            UsersGet => "users-get",
            DevicesAdd => "devices-add",
            DevicesGet => "devices-get",
            DeviceKeyGet => "device-key-get",
            SensorsAdd => "sensors-add",
            SensorsGet => "sensors-get",
            ConsumersAdd => "consumers-add",
            ConsumerSensorEnable => "consumer-sensor-enable",
            ConsumerKeyGet => "consumer-key-get",
            ConsumersConsumeGet => "consumers-consume-get",
            GatewayIngest => "gateway-ingest",
        }
    }

    /// Concrete path with `params` substituted into the template.
    pub fn path(self, params: &BTreeMap<String, String>) -> String {
        let (_, template, _) = self.route();
        template
            .split('/')
            .map(|seg| match seg.strip_prefix('{').and_then(|s| s.strip_suffix('}')) {
                Some(name) => params.get(name).map(String::as_str).unwrap_or(""),
                None => seg,
            })
            .collect::<Vec<_>>()
            .join("/")
    }

    /// Matches a method and path against the endpoint table.
    pub fn resolve(method: &str, path: &str) -> Option<(Endpoint, BTreeMap<String, String>)> {
        let path = path.split('?').next().unwrap_or(path);
        let path = path.strip_suffix('/').filter(|p| !p.is_empty()).unwrap_or(path);
        let segs: Vec<&str> = path.split('/').collect();
        Endpoint::ALL.into_iter().find_map(|e| {
            let (m, template, _) = e.route();
            if !m.as_str().eq_ignore_ascii_case(method) {
                return None;
            }
            let tsegs: Vec<&str> = template.split('/').collect();
            if tsegs.len() != segs.len() {
                return None;
            }
            let mut params = BTreeMap::new();
            for (t, s) in tsegs.iter().zip(&segs) {
                match t.strip_prefix('{').and_then(|t| t.strip_suffix('}')) {
                    Some(name) if !s.is_empty() => {
                        params.insert(name.to_owned(), (*s).to_owned());
                    }
                    Some(_) => return None,
                    None if t == s => {}
                    None => return None,
                }
            }
            Some((e, params))
        })
    }
}

impl fmt::Display for Endpoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.slug())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown endpoint {0:?}")]
pub struct UnknownEndpoint(pub String);

impl FromStr for Endpoint {
    type Err = UnknownEndpoint;

    /// Accepts slugs (`sensors-get`) and display names (`Sensors-Get`, `HTTP-Gateway`).
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm = s.trim().to_ascii_lowercase().replace('_', "-");
        let alias = match norm.as_str() {
            "http-gateway" | "gateway" => Some(Endpoint::GatewayIngest),
            "consumer-consume-get" | "consume" => Some(Endpoint::ConsumersConsumeGet),
            "devicekey-get" => Some(Endpoint::DeviceKeyGet),
            "consumerkey-get" => Some(Endpoint::ConsumerKeyGet),
            "consumersensor-enable" => Some(Endpoint::ConsumerSensorEnable),
            "sensor-get" => Some(Endpoint::SensorsGet),
            _ => None,
        };
        alias
            .or_else(|| Endpoint::ALL.into_iter().find(|e| e.slug() == norm))
            .ok_or_else(|| UnknownEndpoint(s.to_owned()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_endpoint_resolves_from_its_own_path() {
        for e in Endpoint::ALL {
            let params: BTreeMap<String, String> = [("id", "3"), ("sid", "4"), ("sensor_id", "5")]
                .into_iter()
                .map(|(k, v)| (k.to_owned(), v.to_owned()))
                .collect();
            let path = e.path(&params);
            let (got, p) = Endpoint::resolve(e.method().as_str(), &path).unwrap();
            assert_eq!(got, e, "{path}");
            for (k, v) in p {
                assert_eq!(params[&k], v);
            }
        }
    }

    #[test]
    fn method_distinguishes_same_path() {
        assert_eq!(Endpoint::resolve("POST", "/users").unwrap().0, Endpoint::UsersAdd);
        assert_eq!(Endpoint::resolve("GET", "/users").unwrap().0, Endpoint::UsersGet);
        assert_eq!(Endpoint::resolve("GET", "/devices/7/sensors/").unwrap().0, Endpoint::SensorsGet);
        assert!(Endpoint::resolve("DELETE", "/users").is_none());
        assert!(Endpoint::resolve("GET", "/nope").is_none());
        assert!(Endpoint::resolve("GET", "/devices//key").is_none());
    }

    #[test]
    fn names_parse() {
        assert_eq!("sensors-get".parse::<Endpoint>().unwrap(), Endpoint::SensorsGet);
        assert_eq!("Sensors-Get".parse::<Endpoint>().unwrap(), Endpoint::SensorsGet);
        assert_eq!("HTTP-Gateway".parse::<Endpoint>().unwrap(), Endpoint::GatewayIngest);
        assert!("frobnicate".parse::<Endpoint>().is_err());
        for e in Endpoint::ALL {
            assert_eq!(e.slug().parse::<Endpoint>().unwrap(), e);
        }
    }

    #[test]
    fn query_string_is_ignored_for_routing() {
        let (e, p) = Endpoint::resolve("GET", "/consume/9?limit=3").unwrap();
        assert_eq!(e, Endpoint::ConsumersConsumeGet);
        assert_eq!(p["sensor_id"], "9");
    }
}
