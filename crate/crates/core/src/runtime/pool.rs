//! Function instance pools for the FaaS deployments.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use serde::Serialize;

use crate::clock::Micros;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum InstanceState {
    /// Still initializing.
    Cold,
    Warm,
    Busy,
}

#[derive(Debug, Clone, Serialize)]
pub struct Instance {
    pub id: u64,
    pub busy: u32,
    pub created: Micros,
    pub ready_at: Micros,
    pub last_used: Micros,
}

impl Instance {
    pub fn state(&self, now: Micros) -> InstanceState {
        if now < self.ready_at {
            InstanceState::Cold
        } else if self.busy > 0 {
            InstanceState::Busy
        } else {
            InstanceState::Warm
        }
    }
}

/// An instance slot handed to one invocation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Acquired {
    pub instance: u64,
    /// The instance was created for this invocation.
    pub created: bool,
    pub ready_at: Micros,
}

impl Acquired {
    /// Whether the invocation observed initialization, either its own or
    /// that of an instance still starting up.
    pub fn cold(&self, at: Micros) -> bool {
        self.created || self.ready_at > at
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("function pool saturated")]
pub struct Saturated;

#[derive(Debug, Clone)]
pub struct FunctionPool {
    pub name: String,
    max_instances: u32,
    concurrency: u32,
    cold_start: Micros,
    idle_timeout: Micros,
    instances: Vec<Instance>,
    next_id: u64,
    releases: BinaryHeap<Reverse<(Micros, u64)>>,
    in_flight: u64,
    pub invocations: u64,
    pub cold_starts: u64,
}

impl FunctionPool {
    pub fn new(
        name: impl Into<String>,
        max_instances: u32,
        concurrency: u32,
        cold_start: Micros,
        idle_timeout: Micros,
    ) -> Self {
        Self {
            name: name.into(),
            max_instances,
            concurrency,
            cold_start,
            idle_timeout,
            instances: Vec::new(),
            next_id: 0,
            releases: BinaryHeap::new(),
            in_flight: 0,
            invocations: 0,
            cold_starts: 0,
        }
    }

    pub fn instances(&self) -> &[Instance] {
        &self.instances
    }

    pub fn in_flight(&self) -> u64 {
        self.in_flight
    }

    /// Picks the least recently used instance with spare concurrency, or
    /// starts a new one while below `max_instances`.
    pub fn acquire_instance(&mut self, now: Micros) -> Result<Acquired, Saturated> {
        let concurrency = self.concurrency;
        let pick = self
            .instances
            .iter()
            .enumerate()
            .filter(|(_, i)| i.busy < concurrency)
            .min_by_key(|(_, i)| (i.last_used, i.id))
            .map(|(n, _)| n);
        let acquired = match pick {
            Some(n) => {
                let inst = &mut self.instances[n];
                inst.busy += 1;
                inst.last_used = inst.last_used.max(now);
                Acquired { instance: inst.id, created: false, ready_at: inst.ready_at }
            }
            None if (self.instances.len() as u32) < self.max_instances => {
                let id = self.next_id;
                self.next_id += 1;
                let ready_at = now + self.cold_start;
                self.instances.push(Instance { id, busy: 1, created: now, ready_at, last_used: now });
                self.cold_starts += 1;
                Acquired { instance: id, created: true, ready_at }
            }
            None => return Err(Saturated),
        };
        self.in_flight += 1;
        self.invocations += 1;
        Ok(acquired)
    }

    /// Frees the slot taken on `instance` once time reaches `at`.
    pub fn schedule_release(&mut self, instance: u64, at: Micros) {
        self.releases.push(Reverse((at, instance)));
    }

    pub fn release(&mut self, instance: u64, at: Micros) {
        if let Some(inst) = self.instances.iter_mut().find(|i| i.id == instance) {
            debug_assert!(inst.busy > 0);
            inst.busy = inst.busy.saturating_sub(1);
            inst.last_used = inst.last_used.max(at);
            self.in_flight = self.in_flight.saturating_sub(1);
        }
    }

    /// Applies every scheduled release due at or before `now`.
    pub fn settle(&mut self, now: Micros) {
        while let Some(Reverse((at, id))) = self.releases.peek().copied() {
            if at > now {
                break;
            }
            self.releases.pop();
            self.release(id, at);
        }
    }

    /// Drops idle instances unused for longer than the idle timeout.
    /// Returns how many were removed.
    pub fn reap_idle(&mut self, now: Micros) -> usize {
        let before = self.instances.len();
        let timeout = self.idle_timeout;
        self.instances.retain(|i| i.busy > 0 || now.saturating_sub(i.last_used) <= timeout);
        before - self.instances.len()
    }
}
