//! Shared setup for the criterion benches.

use iot_core::auth::{BearerToken, Claims};
use iot_core::clock::Micros;
use iot_core::model::{PayloadSchema, Role, SensorId};
use iot_core::runtime::{DeploymentConfig, Mode, Runtime};
use iot_core::Platform;

pub const T0: Micros = Micros(1_700_000_040_000_000);

/// A runtime holding one admin-owned device with one float sensor.
pub fn runtime_with_sensor(mode: Mode) -> (Runtime, BearerToken, SensorId) {
    let platform = Platform::in_memory(b"bench-secret");
    let admin = platform.bootstrap_admin("admin", "admin").unwrap();
    let claims = Claims::user(admin, Role::Admin, T0.as_secs());
    let device = platform.store().create_device(&claims, "bench").unwrap();
    let sensor = platform.create_sensor(&claims, device, "temp", PayloadSchema::float()).unwrap();
    let token = platform.tokens().issue(claims);
    let config = DeploymentConfig { throttling: false, ..DeploymentConfig::default().with_mode(mode) };
    (Runtime::new(platform, config), token, sensor)
}
