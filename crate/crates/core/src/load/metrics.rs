use serde::{Deserialize, Serialize};

use crate::clock::Micros;
use crate::runtime::InvocationRecord;

pub const BUCKET_WIDTH_S: u64 = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum PercentileError {
    #[error("percentile of an empty sample")]
    EmptySamples,
    #[error("quantile must be in (0, 1]")]
    BadQuantile,
}

/// Linear interpolation between closest ranks at position `(n - 1) * q`.
pub fn percentile(samples: &[f64], q: f64) -> Result<f64, PercentileError> {
    if samples.is_empty() {
        return Err(PercentileError::EmptySamples);
    }
    if !(q > 0.0 && q <= 1.0) {
        return Err(PercentileError::BadQuantile);
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(percentile_sorted(&sorted, q))
}

fn percentile_sorted(sorted: &[f64], q: f64) -> f64 {
    let pos = (sorted.len() - 1) as f64 * q;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

/// One observed request, times relative to the start of the run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub start_s: f64,
    pub latency_ms: f64,
    pub status: u16,
}

impl Sample {
    pub fn from_record(r: &InvocationRecord, origin: Micros) -> Self {
        Self {
            start_s: r.start.saturating_sub(origin).as_secs_f64(),
            latency_ms: r.latency().as_ms_f64(),
            status: r.status,
        }
    }

    pub fn ok(&self) -> bool {
        self.status == 200
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bucket {
    pub start_s: u64,
    pub requests: u64,
    pub successes: u64,
    pub avg_ms: f64,
    pub p95_ms: f64,
}

impl Bucket {
    fn of(start_s: u64, samples: &[Sample]) -> Self {
        let latencies: Vec<f64> = samples.iter().map(|s| s.latency_ms).collect();
        Self {
            start_s,
            requests: samples.len() as u64,
            successes: samples.iter().filter(|s| s.ok()).count() as u64,
            avg_ms: mean(&latencies),
            p95_ms: percentile(&latencies, 0.95).unwrap_or(0.0),
        }
    }
}

fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        0.0
    } else {
        xs.iter().sum::<f64>() / xs.len() as f64
    }
}

/// Groups samples into `width_s` buckets by start time. Empty input gives an
/// empty series; otherwise every bucket up to the last populated one is present.
pub fn bucketize(samples: &[Sample], width_s: u64) -> Vec<Bucket> {
    let Some(last) = samples.iter().map(|s| bucket_index(s.start_s, width_s)).max() else {
        return Vec::new();
    };
    let mut groups: Vec<Vec<Sample>> = vec![Vec::new(); last + 1];
    for s in samples {
        groups[bucket_index(s.start_s, width_s)].push(*s);
    }
    groups.iter().enumerate().map(|(i, g)| Bucket::of(i as u64 * width_s, g)).collect()
}

fn bucket_index(start_s: f64, width_s: u64) -> usize {
    (start_s.max(0.0) / width_s as f64).floor() as usize
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub total_requests: u64,
    pub successes: u64,
    pub average_ms: f64,
    pub p95_ms: f64,
    pub duration_s: f64,
    pub bucket_width_s: u64,
    pub buckets: Vec<Bucket>,
    /// Billed milliseconds summed over requests, 100 ms round-up each.
    pub billed_ms_total: u64,
    /// The run aborted before its scheduled end.
    pub incomplete: bool,
}

impl MetricsReport {
    /// Builds the report for a run of `duration_s`; the bucket series covers
    /// the whole run even where no request started.
    pub fn from_samples(samples: &[Sample], duration_s: f64) -> Self {
        let width = BUCKET_WIDTH_S;
        let mut buckets = bucketize(samples, width);
        let span = (duration_s / width as f64 - 1e-9).ceil().max(0.0) as usize;
        while buckets.len() < span {
            buckets.push(Bucket::of(buckets.len() as u64 * width, &[]));
        }
        let latencies: Vec<f64> = samples.iter().map(|s| s.latency_ms).collect();
        Self {
            total_requests: samples.len() as u64,
            successes: samples.iter().filter(|s| s.ok()).count() as u64,
            average_ms: mean(&latencies),
            p95_ms: percentile(&latencies, 0.95).unwrap_or(0.0),
            duration_s,
            bucket_width_s: width,
            buckets,
            billed_ms_total: latencies
                .iter()
                .map(|l| crate::runtime::billed_ms(Micros((l * 1000.0).round() as u64)))
                .sum(),
            incomplete: false,
        }
    }

    pub fn success_rate(&self) -> f64 {
        if self.total_requests == 0 {
            1.0
        } else {
            self.successes as f64 / self.total_requests as f64
        }
    }

    pub fn all_succeeded(&self) -> bool {
        !self.incomplete && self.successes == self.total_requests
    }

    /// Request-weighted mean of the bucket averages.
    pub fn weighted_bucket_average(&self) -> f64 {
        if self.total_requests == 0 {
            return 0.0;
        }
        self.buckets.iter().map(|b| b.avg_ms * b.requests as f64).sum::<f64>() / self.total_requests as f64
    }
}
