//! Closed-loop load against an in-process runtime in simulated time.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::fixtures::{Fixtures, RequestFactory};
use super::metrics::{MetricsReport, Sample};
use super::scenario::ScenarioSpec;
use super::{LoadError, TICK};
use crate::api::Endpoint;
use crate::clock::Micros;
use crate::runtime::{InvocationRecord, Runtime};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TickSample {
    pub t_s: f64,
    pub target: u32,
    /// VUs alive, including those finishing a last request before retiring.
    pub live: u32,
    pub in_flight: u32,
}

#[derive(Debug, Clone)]
pub struct SimOutcome {
    pub report: MetricsReport,
    pub records: Vec<InvocationRecord>,
    pub ticks: Vec<TickSample>,
}

const COMPLETION: u8 = 0;
const TICK_EVENT: u8 = 1;

struct Sim<'r, 'f> {
    runtime: &'r Runtime,
    factory: RequestFactory<'f>,
    rng: ChaCha8Rng,
    events: BinaryHeap<Reverse<(Micros, u8, u64)>>,
    seq: u64,
    records: Vec<InvocationRecord>,
    endpoint: Endpoint,
    live: u32,
    retiring: u32,
    in_flight: u32,
}

impl Sim<'_, '_> {
    fn push(&mut self, at: Micros, kind: u8) {
        self.seq += 1;
        self.events.push(Reverse((at, kind, self.seq)));
    }

    fn issue(&mut self, now: Micros) {
        let request = self.factory.build(&mut self.rng);
        let routed = self.runtime.handle(&request, now);
        let latency = routed.latency.max(Micros(1));
        self.records.push(InvocationRecord::new(
            self.endpoint,
            now,
            latency,
            routed.response.status,
            routed.cold_start,
        ));
        self.in_flight += 1;
        self.push(now + latency, COMPLETION);
    }
}

/// Drives `runtime` with the scenario starting at simulated time `start`.
/// Identical inputs give identical outcomes.
pub fn run_simulated(
    runtime: &Runtime,
    spec: &ScenarioSpec,
    endpoint: Endpoint,
    fixtures: &Fixtures,
    seed: u64,
    start: Micros,
) -> Result<SimOutcome, LoadError> {
    spec.validate()?;
    let factory = RequestFactory::new(fixtures, endpoint, seed)?;
    let end = start + Micros::from_secs_f64(spec.duration_s());
    let mut sim = Sim {
        runtime,
        factory,
        rng: ChaCha8Rng::seed_from_u64(seed),
        events: BinaryHeap::new(),
        seq: 0,
        records: Vec::new(),
        endpoint,
        live: 0,
        retiring: 0,
        in_flight: 0,
    };
    let mut ticks = Vec::new();
    sim.push(start, TICK_EVENT);

    while let Some(Reverse((now, kind, _))) = sim.events.pop() {
        if kind == COMPLETION {
            sim.in_flight -= 1;
            if sim.retiring > 0 {
                sim.retiring -= 1;
                sim.live -= 1;
            } else if now < end {
                sim.issue(now);
            } else {
                sim.live -= 1;
            }
            continue;
        }
        let t_s = (now - start).as_secs_f64();
        let target = spec.vu_at(t_s.min(spec.duration_s()))?;
        let active = sim.live - sim.retiring;
        if now < end && target > active {
            let mut missing = target - active;
            let revived = missing.min(sim.retiring);
            sim.retiring -= revived;
            missing -= revived;
            for _ in 0..missing {
                sim.live += 1;
                sim.issue(now);
            }
        } else if target < active {
            sim.retiring += active - target;
        }
        ticks.push(TickSample { t_s, target, live: sim.live, in_flight: sim.in_flight });
        let next = now + TICK;
        if next <= end {
            sim.push(next, TICK_EVENT);
        }
    }

    let samples: Vec<Sample> = sim.records.iter().map(|r| Sample::from_record(r, start)).collect();
    Ok(SimOutcome {
        report: MetricsReport::from_samples(&samples, spec.duration_s()),
        records: sim.records,
        ticks,
    })
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::clock::ManualClock;
    use crate::load::{seed, InProcess, ScenarioKind};
    use crate::platform::Platform;
    use crate::runtime::{DeploymentConfig, Mode};

    const T0: Micros = Micros(1_700_000_040_000_000);

    fn world(users: usize, mode: Mode) -> (Runtime, Fixtures) {
        let platform = Platform::in_memory(b"sim-secret");
        platform.bootstrap_admin("admin", "admin").unwrap();
        let transport = InProcess::new(platform.clone(), Arc::new(ManualClock::new(T0)));
        let rt = tokio::runtime::Builder::new_current_thread().build().unwrap();
        let fixtures = rt.block_on(seed(&transport, users, ("admin", "admin"), None, T0)).unwrap();
        let config = DeploymentConfig { throttling: false, ..DeploymentConfig::default().with_mode(mode) };
        (Runtime::new(platform, config), fixtures)
    }

    #[test]
    fn zero_vus_issue_nothing() {
        let (runtime, fixtures) = world(2, Mode::Monolith);
        let spec = ScenarioSpec::constant(0, 30.0);
        let out = run_simulated(&runtime, &spec, Endpoint::SensorsGet, &fixtures, 1, T0).unwrap();
        assert_eq!(out.report.total_requests, 0);
        assert!(out.records.is_empty());
    }

    #[test]
    fn single_vu_closed_loop_throughput() {
        let (runtime, fixtures) = world(3, Mode::Monolith);
        let spec = ScenarioSpec::constant(1, 10.0);
        let out = run_simulated(&runtime, &spec, Endpoint::SensorsGet, &fixtures, 1, T0).unwrap();
        // 1 ms network + 1 ms auth + 10 ms controller per request
        let per_request_ms = 12.0;
        let bound = (10_000.0 / per_request_ms) as u64;
        assert!(out.report.total_requests.abs_diff(bound) <= 1, "{}", out.report.total_requests);
        assert!(out.report.all_succeeded());
        assert!((out.report.average_ms - per_request_ms).abs() < 1e-9);
    }

    #[test]
    fn spike_peaks_in_scaled_window() {
        let (runtime, fixtures) = world(5, Mode::FaasFused);
        let spec = ScenarioSpec::canonical(ScenarioKind::Spike).scaled(0.1, 0.2);
        let out = run_simulated(&runtime, &spec, Endpoint::SensorsGet, &fixtures, 9, T0).unwrap();
        let peak = out.report.buckets.iter().max_by_key(|b| b.requests).unwrap();
        assert!((80..=90).contains(&peak.start_s), "peak bucket at {}", peak.start_s);
        assert_eq!(out.report.buckets.len(), 18);
    }

    #[test]
    fn deterministic_for_same_seed() {
        let spec = ScenarioSpec::canonical(ScenarioKind::Random).scaled(0.02, 0.1);
        let run = |seed| {
            let (runtime, fixtures) = world(4, Mode::FaasSequenced);
            run_simulated(&runtime, &spec, Endpoint::DevicesGet, &fixtures, seed, T0).unwrap().report
        };
        assert_eq!(run(3), run(3));
    }

    #[test]
    fn in_flight_never_exceeds_live_vus() {
        let (runtime, fixtures) = world(4, Mode::FaasFused);
        let spec = ScenarioSpec::canonical(ScenarioKind::Random).scaled(0.05, 0.3);
        let out = run_simulated(&runtime, &spec, Endpoint::GatewayIngest, &fixtures, 5, T0).unwrap();
        assert!(out.ticks.iter().all(|t| t.in_flight <= t.live));
        assert!(out.ticks.iter().all(|t| t.live >= t.target));
        assert!(out.report.total_requests > 0);
    }
}
