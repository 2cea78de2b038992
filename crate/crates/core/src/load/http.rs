//! Closed-loop load against a server over HTTP, in real time.

use std::sync::atomic::{AtomicBool, AtomicU32, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use tokio::task::JoinHandle;

use super::fixtures::{Fixtures, RequestFactory};
use super::metrics::{MetricsReport, Sample};
use super::scenario::ScenarioSpec;
use super::transport::{Transport, TransportError};
use super::{LoadError, TICK};
use crate::api::Endpoint;

/// Runs the scenario with one task per VU. A connection failure stops the
/// run and flags the report incomplete.
pub async fn run_http<T: Transport + 'static>(
    transport: Arc<T>,
    spec: &ScenarioSpec,
    endpoint: Endpoint,
    fixtures: Arc<Fixtures>,
    seed: u64,
    nonce: u64,
) -> Result<MetricsReport, LoadError> {
    spec.validate()?;
    RequestFactory::new(&fixtures, endpoint, nonce)?;
    let duration = spec.duration_s();
    let target = Arc::new(AtomicU32::new(0));
    let abort = Arc::new(AtomicBool::new(false));
    let samples = Arc::new(Mutex::new(Vec::<Sample>::new()));
    let start = Instant::now();
    let mut vus: Vec<Option<JoinHandle<()>>> = Vec::new();
    let mut ticker = tokio::time::interval(TICK.into());
    ticker.set_missed_tick_behavior(tokio::time::MissedTickBehavior::Delay);

    loop {
        ticker.tick().await;
        let t = start.elapsed().as_secs_f64();
        if t >= duration || abort.load(Ordering::Relaxed) {
            break;
        }
        let n = spec.vu_at(t)?;
        target.store(n, Ordering::Relaxed);
        if vus.len() < n as usize {
            vus.resize_with(n as usize, || None);
        }
        for (i, slot) in vus.iter_mut().enumerate().take(n as usize) {
            if slot.as_ref().is_some_and(|h| !h.is_finished()) {
                continue;
            }
            let ctx = VuContext {
                id: i as u32,
                transport: transport.clone(),
                fixtures: fixtures.clone(),
                target: target.clone(),
                abort: abort.clone(),
                samples: samples.clone(),
                start,
                end_s: duration,
            };
            *slot = Some(tokio::spawn(ctx.run(endpoint, seed, nonce)));
        }
    }
    target.store(0, Ordering::Relaxed);
    for h in vus.into_iter().flatten() {
        let _ = h.await;
    }
    let samples = std::mem::take(&mut *samples.lock().unwrap());
    let mut report = MetricsReport::from_samples(&samples, duration);
    report.incomplete = abort.load(Ordering::Relaxed);
    Ok(report)
}

struct VuContext<T> {
    id: u32,
    transport: Arc<T>,
    fixtures: Arc<Fixtures>,
    target: Arc<AtomicU32>,
    abort: Arc<AtomicBool>,
    samples: Arc<Mutex<Vec<Sample>>>,
    start: Instant,
    end_s: f64,
}

impl<T: Transport> VuContext<T> {
    async fn run(self, endpoint: Endpoint, seed: u64, nonce: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ ((self.id as u64) << 32 | 0x5eed));
        let mut factory = RequestFactory::new(&self.fixtures, endpoint, nonce)
            .expect("checked by the caller")
            .lane(self.id as u64);
        loop {
            if self.id >= self.target.load(Ordering::Relaxed) || self.abort.load(Ordering::Relaxed) {
                return;
            }
            let begin = self.start.elapsed();
            if begin.as_secs_f64() >= self.end_s {
                return;
            }
            let request = factory.build(&mut rng);
            let result = self.transport.call(request).await;
            let latency_ms = (self.start.elapsed() - begin).as_secs_f64() * 1000.0;
            let status = match result {
                Ok(r) => r.status,
                Err(TransportError::Connect(e)) => {
                    tracing::warn!(vu = self.id, "aborting run: {e}");
                    self.abort.store(true, Ordering::Relaxed);
                    return;
                }
                // counted as a failed request; the VU carries on
                Err(TransportError::Request(_)) => 0,
            };
            self.samples.lock().unwrap().push(Sample { start_s: begin.as_secs_f64(), latency_ms, status });
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clock::{Clock, SystemClock};
    use crate::load::{seed, Http};
    use crate::platform::Platform;
    use crate::runtime::{DeploymentConfig, Runtime};
    use crate::server::serve;

    #[tokio::test(flavor = "multi_thread", worker_threads = 2)]
    async fn closed_loop_over_http() {
        let platform = Platform::in_memory(b"k");
        platform.bootstrap_admin("admin", "admin").unwrap();
        let runtime = Arc::new(Runtime::new(platform, DeploymentConfig::default()));
        let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
        let base = format!("http://{}", listener.local_addr().unwrap());
        let (tx, rx) = tokio::sync::oneshot::channel::<()>();
        tokio::spawn(serve(listener, runtime, Arc::new(SystemClock), true, async {
            let _ = rx.await;
        }));

        let http = Arc::new(Http::new(&base));
        let fixtures = seed(&*http, 3, ("admin", "admin"), None, SystemClock.now()).await.unwrap();
        let spec = ScenarioSpec::constant(2, 1.0);
        let report = run_http(http, &spec, Endpoint::SensorsGet, Arc::new(fixtures), 1, 1).await.unwrap();
        assert!(report.total_requests > 10, "{}", report.total_requests);
        assert!(report.all_succeeded());
        // every response was held for at least the modeled 12 ms
        assert!(report.average_ms >= 12.0, "{}", report.average_ms);
        drop(tx);
    }

    #[tokio::test]
    async fn unreachable_server_gives_incomplete_report() {
        let listener = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
        let base = format!("http://{}", listener.local_addr().unwrap());
        drop(listener);
        let fixtures = Fixtures {
            issued_at: crate::clock::Micros::ZERO,
            admin_token: crate::auth::BearerToken::new("x"),
            users: Vec::new(),
        };
        let spec = ScenarioSpec::constant(1, 2.0);
        let report = run_http(Arc::new(Http::new(base)), &spec, Endpoint::UsersGet, Arc::new(fixtures), 1, 1)
            .await
            .unwrap();
        assert!(report.incomplete);
        assert_eq!(report.total_requests, 0);
    }
}
