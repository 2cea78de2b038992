use iot_core::load::{bucketize, percentile, MetricsReport, Sample, ScenarioKind, ScenarioSpec};
use proptest::prelude::*;

fn kind() -> impl Strategy<Value = ScenarioKind> {
    prop_oneof![Just(ScenarioKind::Linear), Just(ScenarioKind::Random), Just(ScenarioKind::Spike)]
}

proptest! {
    #[test]
    fn scaling_preserves_shape(k in kind(), ts in 0.01f64..2.0, vs in 0.01f64..2.0, frac in 0.0f64..=1.0) {
        let base = ScenarioSpec::canonical(k);
        let scaled = base.clone().scaled(ts, vs);
        let t = frac * scaled.duration_s();
        let want = (vs * base.vu_at((t / ts).min(1800.0)).unwrap() as f64).round() as u32;
        prop_assert_eq!(scaled.vu_at(t).unwrap(), want);
    }

    #[test]
    fn unscaled_profile_is_piecewise_linear(k in kind(), frac in 0.0f64..=1.0) {
        let s = ScenarioSpec::canonical(k);
        let t = frac * 1800.0;
        let v = s.vu_at(t).unwrap() as f64;
        let pts = k.control_points();
        let i = pts.iter().rposition(|&(m, _)| (m as f64 * 60.0) <= t).unwrap();
        let (m0, v0) = pts[i];
        let exact = if i + 1 < pts.len() {
            let (m1, v1) = pts[i + 1];
            v0 as f64 + (v1 as f64 - v0 as f64) * (t - m0 as f64 * 60.0) / ((m1 - m0) as f64 * 60.0)
        } else {
            v0 as f64
        };
        prop_assert!((v - exact).abs() <= 0.5 + 1e-9);
    }

    #[test]
    fn percentile_within_sample_range(xs in prop::collection::vec(0.0f64..1e4, 1..200), q in 0.001f64..=1.0) {
        let p = percentile(&xs, q).unwrap();
        let lo = xs.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(p >= lo && p <= hi);
    }

    #[test]
    fn buckets_partition_and_average_consistently(
        raw in prop::collection::vec((0.0f64..120.0, 0.1f64..500.0, prop::bool::weighted(0.9)), 0..400),
    ) {
        let samples: Vec<Sample> = raw
            .iter()
            .map(|&(start_s, latency_ms, ok)| Sample { start_s, latency_ms, status: if ok { 200 } else { 500 } })
            .collect();
        let buckets = bucketize(&samples, 10);
        prop_assert_eq!(buckets.iter().map(|b| b.requests).sum::<u64>(), samples.len() as u64);
        let report = MetricsReport::from_samples(&samples, 120.0);
        prop_assert_eq!(report.buckets.len(), 12);
        prop_assert!(report.successes <= report.total_requests);
        prop_assert!((report.weighted_bucket_average() - report.average_ms).abs() <= 1e-9 * report.average_ms.max(1.0));
        for (i, b) in report.buckets.iter().enumerate() {
            prop_assert_eq!(b.start_s, i as u64 * 10);
            let n = samples.iter().filter(|s| (s.start_s / 10.0).floor() as usize == i).count() as u64;
            prop_assert_eq!(b.requests, n);
        }
    }
}
