//! Reservation versus pay-per-use deployment cost.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

/// Hours per month used to prorate monthly disk prices.
pub const HOURS_PER_MONTH: f64 = 730.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClusterPricing {
    pub vm_hour_usd: f64,
    pub node_count: u32,
    pub cluster_fee_usd_per_hour: f64,
    pub disk_gib: f64,
    pub disk_usd_per_gib_month: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UsagePricing {
    pub usd_per_million_invocations: f64,
    pub usd_per_vcpu_second: f64,
    pub usd_per_gib_second: f64,
    pub vcpus_per_instance: f64,
    pub memory_gib: f64,
    /// Each invocation's duration is rounded up to a multiple of this.
    #[serde(default = "default_granularity")]
    pub billing_granularity_ms: u64,
}

fn default_granularity() -> u64 {
    crate::runtime::BILLING_QUANTUM_MS
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum CostError {
    #[error("cost per 1000 requests is undefined for zero requests")]
    NoRequests,
    #[error("invalid pricing: {0}")]
    InvalidPricing(String),
    #[error("unknown pricing entry {0:?}")]
    UnknownEntry(String),
    #[error("pricing file: {0}")]
    Io(String),
}

impl ClusterPricing {
    pub fn validate(&self) -> Result<(), CostError> {
        let fields =
            [self.vm_hour_usd, self.cluster_fee_usd_per_hour, self.disk_gib, self.disk_usd_per_gib_month];
        if fields.iter().all(|v| v.is_finite() && *v >= 0.0) {
            Ok(())
        } else {
            Err(CostError::InvalidPricing("cluster prices must be finite and >= 0".into()))
        }
    }

    pub fn node_cost(&self, duration_h: f64) -> f64 {
        self.node_count as f64 * self.vm_hour_usd * duration_h
    }

    pub fn fee_cost(&self, duration_h: f64) -> f64 {
        self.cluster_fee_usd_per_hour * duration_h
    }

    pub fn disk_cost(&self, duration_h: f64) -> f64 {
        self.disk_gib * self.disk_usd_per_gib_month * duration_h / HOURS_PER_MONTH
    }
}

impl UsagePricing {
    pub fn validate(&self) -> Result<(), CostError> {
        let fields = [
            self.usd_per_million_invocations,
            self.usd_per_vcpu_second,
            self.usd_per_gib_second,
            self.vcpus_per_instance,
            self.memory_gib,
        ];
        if !fields.iter().all(|v| v.is_finite() && *v >= 0.0) {
            return Err(CostError::InvalidPricing("usage prices must be finite and >= 0".into()));
        }
        if self.billing_granularity_ms == 0 {
            return Err(CostError::InvalidPricing("billing_granularity_ms must be > 0".into()));
        }
        Ok(())
    }

    /// Billed milliseconds for one invocation of `duration_ms`.
    pub fn billed_ms(&self, duration_ms: f64) -> u64 {
        let g = self.billing_granularity_ms;
        let units = (duration_ms.max(0.0) / g as f64 - 1e-9).ceil().max(1.0);
        units as u64 * g
    }

    pub fn billed_seconds<I: IntoIterator<Item = f64>>(&self, durations_ms: I) -> f64 {
        durations_ms.into_iter().map(|d| self.billed_ms(d) as f64 / 1000.0).sum()
    }

    /// USD per billed second of one instance.
    pub fn per_second_usd(&self) -> f64 {
        self.vcpus_per_instance * self.usd_per_vcpu_second + self.memory_gib * self.usd_per_gib_second
    }
}

pub fn reservation_cost(p: &ClusterPricing, duration_h: f64) -> f64 {
    p.node_cost(duration_h) + p.fee_cost(duration_h) + p.disk_cost(duration_h)
}

pub fn payperuse_cost(p: &UsagePricing, invocations: u64, billed_seconds_total: f64) -> f64 {
    invocations as f64 / 1e6 * p.usd_per_million_invocations
        + billed_seconds_total * p.vcpus_per_instance * p.usd_per_vcpu_second
        + billed_seconds_total * p.memory_gib * p.usd_per_gib_second
}

/// USD cents per 1000 requests.
pub fn cost_per_1000(total_usd: f64, requests: u64) -> Result<f64, CostError> {
    if requests == 0 {
        return Err(CostError::NoRequests);
    }
    Ok(total_usd * 100_000.0 / requests as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CostModel {
    Reservation,
    PayPerUse,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostReport {
    pub deployment: String,
    pub model: CostModel,
    pub requests: u64,
    pub total_usd: f64,
    pub cost_cents_per_1000_requests: f64,
    pub breakdown: BTreeMap<String, f64>,
}

impl CostReport {
    pub fn reservation(
        deployment: &str,
        p: &ClusterPricing,
        duration_h: f64,
        requests: u64,
    ) -> Result<Self, CostError> {
        p.validate()?;
        let breakdown = BTreeMap::from([
            ("nodes".to_owned(), p.node_cost(duration_h)),
            ("cluster_fee".to_owned(), p.fee_cost(duration_h)),
            ("disk".to_owned(), p.disk_cost(duration_h)),
        ]);
        let total_usd = reservation_cost(p, duration_h);
        Ok(Self {
            deployment: deployment.to_owned(),
            model: CostModel::Reservation,
            requests,
            total_usd,
            cost_cents_per_1000_requests: cost_per_1000(total_usd, requests)?,
            breakdown,
        })
    }

    pub fn pay_per_use(
        deployment: &str,
        p: &UsagePricing,
        invocations: u64,
        billed_seconds_total: f64,
    ) -> Result<Self, CostError> {
        p.validate()?;
        let cpu = billed_seconds_total * p.vcpus_per_instance * p.usd_per_vcpu_second;
        let mem = billed_seconds_total * p.memory_gib * p.usd_per_gib_second;
        let inv = invocations as f64 / 1e6 * p.usd_per_million_invocations;
        let total_usd = payperuse_cost(p, invocations, billed_seconds_total);
        Ok(Self {
            deployment: deployment.to_owned(),
            model: CostModel::PayPerUse,
            requests: invocations,
            total_usd,
            cost_cents_per_1000_requests: cost_per_1000(total_usd, invocations)?,
            breakdown: BTreeMap::from([
                ("invocations".to_owned(), inv),
                ("vcpu".to_owned(), cpu),
                ("memory".to_owned(), mem),
            ]),
        })
    }
}

/// Smallest request count whose pay-per-use cost reaches `reservation_usd`,
/// every request billed like one of average duration `avg_ms`.
pub fn break_even_requests(reservation_usd: f64, p: &UsagePricing, avg_ms: f64) -> Option<u64> {
    let per_request = p.billed_seconds([avg_ms]);
    let cost = |n: u64| payperuse_cost(p, n, per_request * n as f64);
    if cost(1) <= 0.0 {
        return None;
    }
    let mut hi = 1u64;
    while cost(hi) < reservation_usd {
        hi = hi.checked_mul(2)?;
    }
    let mut lo = 0u64;
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if cost(mid) < reservation_usd {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some(hi)
}

/// How many times more requests than `served` a reservation-priced run must
/// serve for its cost per request to fall to the pay-per-use level.
pub fn break_even_ratio(reservation_usd: f64, served: u64, p: &UsagePricing, avg_ms: f64) -> Option<f64> {
    break_even_requests(reservation_usd, p, avg_ms).map(|n| n as f64 / served as f64)
}

/// Pricing file: named reservation clusters and pay-per-use services.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PricingConfig {
    /// Run length used for reservation pricing when the metrics do not say.
    #[serde(default = "default_duration_h")]
    pub duration_h: f64,
    #[serde(default)]
    pub cluster: BTreeMap<String, ClusterPricing>,
    #[serde(default)]
    pub usage: BTreeMap<String, UsagePricing>,
}

fn default_duration_h() -> f64 {
    0.5
}

impl PricingConfig {
    pub fn parse(text: &str) -> Result<Self, CostError> {
        let cfg: Self = toml::from_str(text).map_err(|e| CostError::InvalidPricing(e.to_string()))?;
        for c in cfg.cluster.values() {
            c.validate()?;
        }
        for u in cfg.usage.values() {
            u.validate()?;
        }
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, CostError> {
        let text = std::fs::read_to_string(path.as_ref())
            .map_err(|e| CostError::Io(format!("{}: {e}", path.as_ref().display())))?;
        Self::parse(&text)
    }

    pub fn cluster(&self, name: &str) -> Result<&ClusterPricing, CostError> {
        self.cluster.get(name).ok_or_else(|| CostError::UnknownEntry(name.to_owned()))
    }

    pub fn usage(&self, name: &str) -> Result<&UsagePricing, CostError> {
        self.usage.get(name).ok_or_else(|| CostError::UnknownEntry(name.to_owned()))
    }
}
