use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::api::Endpoint;
use crate::clock::Micros;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Mode {
    /// One routed service scaled as identical replicas.
    #[serde(rename = "monolith")]
    Monolith,
    /// Auth and controller as separate functions chained per request; the
    /// auth pool is shared by all endpoints.
    #[serde(rename = "faas-seq", alias = "faas_sequenced")]
    FaasSequenced,
    /// One function per endpoint with auth inlined.
    #[serde(rename = "faas-fused", alias = "faas_fused")]
    FaasFused,
}

impl Mode {
    pub const ALL: [Mode; 3] = [Mode::Monolith, Mode::FaasSequenced, Mode::FaasFused];

    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Monolith => "monolith",
            Mode::FaasSequenced => "faas-seq",
            Mode::FaasFused => "faas-fused",
        }
    }

    pub fn is_faas(self) -> bool {
        self != Mode::Monolith
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "monolith" => Ok(Mode::Monolith),
            "faas-seq" | "faas_sequenced" | "faas-sequenced" => Ok(Mode::FaasSequenced),
            "faas-fused" | "faas_fused" => Ok(Mode::FaasFused),
            other => Err(format!("unknown mode {other:?} (expected monolith, faas-seq or faas-fused)")),
        }
    }
}

/// Scaling limits and latency model of a deployment. All durations are in
/// the unit named by the field suffix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DeploymentConfig {
    pub mode: Mode,

    // replica model (monolith)
    pub hpa_target_utilization: f64,
    pub min_replicas: u32,
    pub max_replicas: u32,
    /// Concurrent requests one replica serves before requests queue.
    pub replica_capacity: u32,
    pub hpa_sync_period_s: u64,

    // function pools (faas modes)
    pub cold_start_ms: u64,
    pub idle_timeout_s: u64,
    pub max_instances: u32,
    pub instance_concurrency: u32,
    pub per_minute_invocation_limit: u64,
    pub max_concurrent_invocations: u64,
    pub function_memory_mib: u32,
    /// Routing hop added to every function invocation in sequenced mode.
    pub sequence_overhead_ms: u64,
    /// When false, the per-minute and concurrent-invocation limits are not enforced.
    pub throttling: bool,

    // service-time model, shared by all modes
    pub network_overhead_ms: u64,
    pub auth_service_ms: u64,
    pub service_time_ms: u64,
    /// Per-endpoint controller time, keyed by endpoint slug.
    pub service_time_overrides: BTreeMap<String, u64>,
}

impl Default for DeploymentConfig {
    fn default() -> Self {
        Self {
            mode: Mode::Monolith,
            hpa_target_utilization: 0.5,
            min_replicas: 1,
            max_replicas: 40,
            replica_capacity: 8,
            hpa_sync_period_s: 15,
            cold_start_ms: 500,
            idle_timeout_s: 60,
            max_instances: 20,
            instance_concurrency: 100,
            per_minute_invocation_limit: 25_000,
            max_concurrent_invocations: 9_999,
            function_memory_mib: 256,
            sequence_overhead_ms: 5,
            throttling: true,
            network_overhead_ms: 1,
            auth_service_ms: 1,
            service_time_ms: 10,
            service_time_overrides: BTreeMap::new(),
        }
    }
}

impl DeploymentConfig {
    pub fn with_mode(mut self, mode: Mode) -> Self {
        self.mode = mode;
        self
    }

    pub fn validate(&self) -> Result<(), String> {
        let positive = [
            ("min_replicas", self.min_replicas as u64),
            ("max_replicas", self.max_replicas as u64),
            ("replica_capacity", self.replica_capacity as u64),
            ("hpa_sync_period_s", self.hpa_sync_period_s),
            ("idle_timeout_s", self.idle_timeout_s),
            ("max_instances", self.max_instances as u64),
            ("instance_concurrency", self.instance_concurrency as u64),
            ("per_minute_invocation_limit", self.per_minute_invocation_limit),
            ("max_concurrent_invocations", self.max_concurrent_invocations),
            ("function_memory_mib", self.function_memory_mib as u64),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(format!("runtime.{name} must be > 0"));
            }
        }
        if !(self.hpa_target_utilization > 0.0 && self.hpa_target_utilization <= 1.0) {
            return Err("runtime.hpa_target_utilization must be in (0, 1]".into());
        }
        if self.min_replicas > self.max_replicas {
            return Err("runtime.min_replicas exceeds max_replicas".into());
        }
        for key in self.service_time_overrides.keys() {
            key.parse::<Endpoint>().map_err(|e| format!("service_time_overrides: {e}"))?;
        }
        Ok(())
    }

    pub fn controller_time(&self, endpoint: Endpoint) -> Micros {
        Micros::from_ms(
            self.service_time_overrides
                .iter()
                .find(|(k, _)| k.parse::<Endpoint>().ok() == Some(endpoint))
                .map(|(_, v)| *v)
                .unwrap_or(self.service_time_ms),
        )
    }

    pub fn auth_time(&self, endpoint: Endpoint) -> Micros {
        if endpoint.auth_kind() == crate::api::AuthKind::None {
            Micros::ZERO
        } else {
            Micros::from_ms(self.auth_service_ms)
        }
    }

    pub fn cold_start(&self) -> Micros {
        Micros::from_ms(self.cold_start_ms)
    }

    pub fn idle_timeout(&self) -> Micros {
        Micros::from_secs(self.idle_timeout_s)
    }

    pub fn network_overhead(&self) -> Micros {
        Micros::from_ms(self.network_overhead_ms)
    }

    pub fn sequence_overhead(&self) -> Micros {
        Micros::from_ms(self.sequence_overhead_ms)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_reference_deployment() {
        let c = DeploymentConfig::default();
        assert_eq!(c.max_replicas, 40);
        assert_eq!(c.max_instances, 20);
        assert_eq!(c.instance_concurrency, 100);
        assert_eq!(c.per_minute_invocation_limit, 25_000);
        assert_eq!(c.max_concurrent_invocations, 9_999);
        assert_eq!(c.function_memory_mib, 256);
        assert_eq!(c.hpa_target_utilization, 0.5);
        assert!(c.validate().is_ok());
    }

    #[test]
    fn validation_rejects_zero_limits() {
        let c = DeploymentConfig { max_instances: 0, ..Default::default() };
        assert!(c.validate().is_err());
        let c = DeploymentConfig { hpa_target_utilization: 1.5, ..Default::default() };
        assert!(c.validate().is_err());
        let mut c = DeploymentConfig::default();
        c.service_time_overrides.insert("bogus".into(), 3);
        assert!(c.validate().is_err());
    }

    #[test]
    fn service_time_overrides_by_slug() {
        let mut c = DeploymentConfig::default();
        c.service_time_overrides.insert("sensors-get".into(), 3);
        assert_eq!(c.controller_time(Endpoint::SensorsGet), Micros::from_ms(3));
        assert_eq!(c.controller_time(Endpoint::DevicesGet), Micros::from_ms(10));
        assert_eq!(c.auth_time(Endpoint::UsersSignin), Micros::ZERO);
    }

    #[test]
    fn mode_names() {
        for m in Mode::ALL {
            assert_eq!(m.as_str().parse::<Mode>().unwrap(), m);
        }
        assert!("lambda".parse::<Mode>().is_err());
        let parsed: DeploymentConfig = toml::from_str("mode = \"faas-fused\"").unwrap();
        assert_eq!(parsed.mode, Mode::FaasFused);
    }
}
