//! Horizontal replica scaling for the monolith deployment.

use super::config::DeploymentConfig;
use crate::clock::Micros;

/// `clamp(ceil(current * observed / target), min, max)`.
pub fn desired_replicas(current: u32, observed: f64, target: f64, min: u32, max: u32) -> u32 {
    debug_assert!(current >= 1);
    let raw = current as f64 * (observed / target);
    // absorb float noise so that an exact integer ratio does not round up
    let desired = (raw - 1e-9).ceil().max(0.0);
    (desired.min(u32::MAX as f64) as u32).clamp(min.max(1), max)
}

pub fn hpa_step(current: u32, observed: f64, config: &DeploymentConfig) -> u32 {
    desired_replicas(
        current,
        observed,
        config.hpa_target_utilization,
        config.min_replicas,
        config.max_replicas,
    )
}

/// Replica set with FIFO admission: a request starts immediately while fewer
/// than `replicas * capacity` requests are in the system, and otherwise when
/// enough earlier requests have completed.
#[derive(Debug, Clone)]
pub struct ReplicaSet {
    replicas: u32,
    capacity: u32,
    /// Completion times of admitted requests, ascending.
    completions: Vec<Micros>,
    next_sync: Option<Micros>,
    sync_period: Micros,
    history: Vec<(Micros, u32)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Admission {
    pub start: Micros,
    pub end: Micros,
}

impl ReplicaSet {
    pub fn new(config: &DeploymentConfig) -> Self {
        Self {
            replicas: config.min_replicas.max(1),
            capacity: config.replica_capacity,
            completions: Vec::new(),
            next_sync: None,
            sync_period: Micros::from_secs(config.hpa_sync_period_s),
            history: Vec::new(),
        }
    }

    pub fn replicas(&self) -> u32 {
        self.replicas
    }

    /// `(time, replicas)` after every sync that changed the replica count.
    pub fn history(&self) -> &[(Micros, u32)] {
        &self.history
    }

    fn slots(&self) -> usize {
        (self.replicas as usize) * (self.capacity as usize)
    }

    /// Requests admitted and not yet completed at `t`. Only valid for `t`
    /// not earlier than the last settle.
    fn in_system_at(&self, t: Micros) -> usize {
        self.completions.len() - self.completions.partition_point(|c| *c <= t)
    }

    pub fn utilization(&self, t: Micros) -> f64 {
        self.in_system_at(t) as f64 / self.slots() as f64
    }

    /// Runs every HPA sync due up to `now`, then forgets completed requests.
    pub fn advance(&mut self, now: Micros, config: &DeploymentConfig) {
        let period = self.sync_period;
        let mut next = *self.next_sync.get_or_insert(now + period);
        while next <= now {
            let u = self.utilization(next);
            let desired = hpa_step(self.replicas, u, config);
            if desired != self.replicas {
                self.replicas = desired;
                self.history.push((next, desired));
            }
            if u == 0.0 && self.replicas == config.min_replicas.max(1) {
                // nothing can change until traffic returns
                let skipped = (now.0 - next.0) / period.0;
                next = Micros(next.0 + skipped * period.0);
            }
            next = next + period;
        }
        self.next_sync = Some(next);
        let done = self.completions.partition_point(|c| *c <= now);
        self.completions.drain(..done);
    }

    pub fn in_flight(&self) -> usize {
        self.completions.len()
    }

    pub fn admit(&mut self, now: Micros, service: Micros) -> Admission {
        let n = self.completions.len();
        let slots = self.slots();
        let start = if n < slots { now } else { self.completions[n - slots].max(now) };
        let end = start + service;
        let at = self.completions.partition_point(|c| *c <= end);
        self.completions.insert(at, end);
        Admission { start, end }
    }
}
