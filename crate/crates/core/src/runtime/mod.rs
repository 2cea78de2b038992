//! Deployment runtimes. The same handler units are routed either through a
//! horizontally scaled monolith or through per-function instance pools, and
//! each routed request carries the latency the deployment would add.

mod config;
mod hpa;
mod pool;
mod throttle;

use std::collections::BTreeMap;
use std::sync::Mutex;

use serde::Serialize;

pub use config::{DeploymentConfig, Mode};
pub use hpa::{desired_replicas, hpa_step, Admission, ReplicaSet};
pub use pool::{Acquired, FunctionPool, Instance, InstanceState, Saturated};
pub use throttle::Throttle;

use crate::api::{Endpoint, HandlerUnit, Request, Response, UnitOutput, AUTH_UNIT};
use crate::clock::Micros;
use crate::platform::Platform;

pub const COLD_START_HEADER: &str = "x-cold-start";
pub const MODE_HEADER: &str = "x-runtime-mode";

/// Billing granularity of a function invocation.
pub const BILLING_QUANTUM_MS: u64 = 100;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InvocationRecord {
    pub endpoint: Endpoint,
    pub start: Micros,
    pub end: Micros,
    pub status: u16,
    pub cold_start: bool,
    /// Duration rounded up to the next billing quantum.
    pub billed_ms: u64,
}

impl InvocationRecord {
    pub fn new(endpoint: Endpoint, start: Micros, latency: Micros, status: u16, cold_start: bool) -> Self {
        Self { endpoint, start, end: start + latency, status, cold_start, billed_ms: billed_ms(latency) }
    }

    pub fn latency(&self) -> Micros {
        self.end - self.start
    }
}

pub fn billed_ms(duration: Micros) -> u64 {
    let q = BILLING_QUANTUM_MS * 1_000;
    (duration.0.div_ceil(q)).max(1) * BILLING_QUANTUM_MS
}

/// A response together with the latency the deployment added to it.
#[derive(Debug, Clone, PartialEq)]
pub struct Routed {
    pub response: Response,
    pub latency: Micros,
    pub cold_start: bool,
}

impl Routed {
    pub fn record(&self, endpoint: Endpoint, start: Micros) -> InvocationRecord {
        InvocationRecord::new(endpoint, start, self.latency, self.response.status, self.cold_start)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct PoolSnapshot {
    pub name: String,
    pub instances: usize,
    pub in_flight: u64,
    pub invocations: u64,
    pub cold_starts: u64,
}

#[derive(Debug)]
enum Backend {
    Replicas(ReplicaSet),
    Functions(BTreeMap<String, FunctionPool>),
}

#[derive(Debug)]
struct State {
    backend: Backend,
    throttle: Throttle,
}

#[derive(Debug)]
pub struct Runtime {
    platform: Platform,
    config: DeploymentConfig,
    state: Mutex<State>,
}

impl Runtime {
    pub fn new(platform: Platform, config: DeploymentConfig) -> Self {
        let backend = match config.mode {
            Mode::Monolith => Backend::Replicas(ReplicaSet::new(&config)),
            Mode::FaasSequenced | Mode::FaasFused => Backend::Functions(BTreeMap::new()),
        };
        let throttle = Throttle::new(config.per_minute_invocation_limit);
        Self { platform, config, state: Mutex::new(State { backend, throttle }) }
    }

    pub fn mode(&self) -> Mode {
        self.config.mode
    }

    pub fn config(&self) -> &DeploymentConfig {
        &self.config
    }

    pub fn platform(&self) -> &Platform {
        &self.platform
    }

    /// Current monolith replica count; `None` for function deployments.
    pub fn replicas(&self) -> Option<u32> {
        match &self.state.lock().unwrap().backend {
            Backend::Replicas(r) => Some(r.replicas()),
            Backend::Functions(_) => None,
        }
    }

    pub fn replica_history(&self) -> Vec<(Micros, u32)> {
        match &self.state.lock().unwrap().backend {
            Backend::Replicas(r) => r.history().to_vec(),
            Backend::Functions(_) => Vec::new(),
        }
    }

    pub fn pools(&self) -> Vec<PoolSnapshot> {
        match &self.state.lock().unwrap().backend {
            Backend::Replicas(_) => Vec::new(),
            Backend::Functions(pools) => pools
                .values()
                .map(|p| PoolSnapshot {
                    name: p.name.clone(),
                    instances: p.instances().len(),
                    in_flight: p.in_flight(),
                    invocations: p.invocations,
                    cold_starts: p.cold_starts,
                })
                .collect(),
        }
    }

    pub fn pool(&self, name: &str) -> Option<PoolSnapshot> {
        self.pools().into_iter().find(|p| p.name == name)
    }

    /// Routes one request arriving at `now`.
    pub fn handle(&self, request: &Request, now: Micros) -> Routed {
        let mut state = self.state.lock().unwrap();
        self.platform.pipeline().pump_due(now);
        let State { backend, throttle } = &mut *state;
        let routed = match backend {
            Backend::Replicas(replicas) => self.route_monolith(replicas, request, now),
            Backend::Functions(pools) => self.route_functions(pools, throttle, request, now),
        };
        let Routed { response, latency, cold_start } = routed;
        Routed {
            response: response
                .with_header(COLD_START_HEADER, if cold_start { "true" } else { "false" })
                .with_header(MODE_HEADER, self.config.mode.as_str()),
            latency,
            cold_start,
        }
    }

    fn route_monolith(&self, replicas: &mut ReplicaSet, request: &Request, now: Micros) -> Routed {
        replicas.advance(now, &self.config);
        let e = request.endpoint;
        let response = match HandlerUnit::fused(e).invoke(&self.platform, request, None, now) {
            UnitOutput::Respond(r) => r,
            UnitOutput::Continue(_) => unreachable!("fused units always respond"),
        };
        let service = self.config.auth_time(e) + self.config.controller_time(e);
        let admitted = replicas.admit(now, service);
        Routed { response, latency: self.config.network_overhead() + (admitted.end - now), cold_start: false }
    }

    fn pool_mut<'a>(
        &self,
        pools: &'a mut BTreeMap<String, FunctionPool>,
        name: &str,
    ) -> &'a mut FunctionPool {
        pools.entry(name.to_owned()).or_insert_with(|| {
            FunctionPool::new(
                name,
                self.config.max_instances,
                self.config.instance_concurrency,
                self.config.cold_start(),
                self.config.idle_timeout(),
            )
        })
    }

    /// Time before an acquired slot can start running a leg beginning at `leg_start`.
    fn init_wait(&self, acq: &Acquired, leg_start: Micros) -> Micros {
        if acq.created {
            self.config.cold_start()
        } else {
            acq.ready_at.saturating_sub(leg_start)
        }
    }

    fn reject(&self, status: u16, message: &str) -> Routed {
        Routed {
            response: Response::status(status, message),
            latency: self.config.network_overhead(),
            cold_start: false,
        }
    }

    fn route_functions(
        &self,
        pools: &mut BTreeMap<String, FunctionPool>,
        throttle: &mut Throttle,
        request: &Request,
        now: Micros,
    ) -> Routed {
        for p in pools.values_mut() {
            p.settle(now);
            p.reap_idle(now);
        }
        if self.config.throttling {
            let in_flight: u64 = pools.values().map(|p| p.in_flight()).sum();
            if in_flight >= self.config.max_concurrent_invocations {
                return self.reject(429, "too many concurrent invocations");
            }
            if !throttle.admit(now) {
                return self.reject(429, "invocation rate limit exceeded");
            }
        }
        let e = request.endpoint;
        let net = self.config.network_overhead();
        let chained = self.config.mode == Mode::FaasSequenced && e.is_sequenced();
        if !chained {
            let hop = if self.config.mode == Mode::FaasSequenced {
                self.config.sequence_overhead()
            } else {
                Micros::ZERO
            };
            let pool = self.pool_mut(pools, e.slug());
            let Ok(acq) = pool.acquire_instance(now) else {
                return self.reject(503, "no function instance available");
            };
            let response = match HandlerUnit::fused(e).invoke(&self.platform, request, None, now) {
                UnitOutput::Respond(r) => r,
                UnitOutput::Continue(_) => unreachable!("fused units always respond"),
            };
            let leg =
                hop + self.init_wait(&acq, now) + self.config.auth_time(e) + self.config.controller_time(e);
            pool.schedule_release(acq.instance, now + leg);
            return Routed { response, latency: net + leg, cold_start: acq.cold(now) };
        }

        // auth leg
        let hop = self.config.sequence_overhead();
        let auth_pool = self.pool_mut(pools, AUTH_UNIT);
        let Ok(auth_acq) = auth_pool.acquire_instance(now) else {
            return self.reject(503, "no function instance available");
        };
        let auth_leg = hop + self.init_wait(&auth_acq, now) + self.config.auth_time(e);
        auth_pool.schedule_release(auth_acq.instance, now + auth_leg);
        let auth_cold = auth_acq.cold(now);
        let claims = match HandlerUnit::auth().invoke(&self.platform, request, None, now) {
            UnitOutput::Continue(c) => c,
            UnitOutput::Respond(r) => {
                return Routed { response: r, latency: net + auth_leg, cold_start: auth_cold }
            }
        };

        // controller leg, reserved now so that the sequence holds its slot
        let leg_start = now + auth_leg;
        let ctrl_pool = self.pool_mut(pools, e.slug());
        let Ok(ctrl_acq) = ctrl_pool.acquire_instance(now) else {
            return Routed {
                response: Response::status(503, "no function instance available"),
                latency: net + auth_leg,
                cold_start: auth_cold,
            };
        };
        let ctrl_leg = hop + self.init_wait(&ctrl_acq, leg_start) + self.config.controller_time(e);
        ctrl_pool.schedule_release(ctrl_acq.instance, leg_start + ctrl_leg);
        let response = match HandlerUnit::controller(e).invoke(&self.platform, request, claims, now) {
            UnitOutput::Respond(r) => r,
            UnitOutput::Continue(_) => unreachable!("controllers always respond"),
        };
        Routed {
            response,
            latency: net + auth_leg + ctrl_leg,
            cold_start: auth_cold || ctrl_acq.created || ctrl_acq.ready_at > leg_start,
        }
    }
}
