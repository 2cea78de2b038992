//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! fails the test binary if any criterion fails.

use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::Arc;
use std::time::{Duration, Instant};

use iot_core::api::{Endpoint, Response};
use iot_core::clock::{Clock, ManualClock, Micros};
use iot_core::cost::{break_even_ratio, reservation_cost, CostReport, PricingConfig};
use iot_core::load::{percentile, seed, Fixtures, InProcess, RequestFactory, ScenarioKind, ScenarioSpec};
use iot_core::model::{PayloadSchema, SensorId};
use iot_core::pipeline::{Pipeline, PipelineSettings, SensorReading};
use iot_core::runtime::{hpa_step, DeploymentConfig, Mode, Runtime, COLD_START_HEADER};
use iot_core::Platform;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

const T0: Micros = Micros(1_700_000_040_000_000);

fn workspace_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        let ok: bool = $cond;
        if !ok {
            return Err(format!($($fmt)+));
        }
    };
}

fn scenario_exactness() -> Outcome {
    let started = Instant::now();
    let expect: [(ScenarioKind, &[(f64, u32)]); 3] = [
        (ScenarioKind::Linear, &[(0.0, 0), (15.0, 50), (30.0, 100)]),
        (ScenarioKind::Random, &[(0.0, 0), (7.0, 60), (14.0, 30), (21.0, 100), (28.0, 40), (30.0, 0)]),
        (
            ScenarioKind::Spike,
            &[(0.0, 0), (1.0, 10), (14.0, 10), (15.0, 100), (16.0, 10), (29.0, 10), (30.0, 0)],
        ),
    ];
    let mut checked = 0;
    for (kind, points) in expect {
        let spec = ScenarioSpec::canonical(kind);
        for &(min, vus) in points {
            let got = spec.vu_at(min * 60.0).map_err(|e| e.to_string())?;
            ensure!(got == vus, "{kind:?} at {min} min: {got} VUs, expected {vus}");
            checked += 1;
        }
    }
    // the spike ramps down over the final minute
    let spike = ScenarioSpec::canonical(ScenarioKind::Spike);
    let mut last = spike.vu_at(29.0 * 60.0).unwrap();
    for s in (29 * 60..=30 * 60).step_by(5) {
        let v = spike.vu_at(s as f64).unwrap();
        ensure!(v <= last, "spike ramp not monotone at {s} s");
        last = v;
    }
    ensure!(last == 0, "spike does not reach 0 by 30 min");
    let elapsed = started.elapsed();
    ensure!(elapsed < Duration::from_secs(1), "took {elapsed:?}");
    Ok(format!("{checked} control points, {elapsed:?}"))
}

fn world(mode: Mode) -> (Runtime, Fixtures) {
    let platform = Platform::in_memory(b"acceptance-secret");
    platform.bootstrap_admin("admin", "admin").unwrap();
    let transport = InProcess::new(platform.clone(), Arc::new(ManualClock::new(T0)));
    let rt = tokio::runtime::Builder::new_current_thread().build().unwrap();
    let fixtures = rt.block_on(seed(&transport, 10, ("admin", "admin"), None, T0)).unwrap();
    let config = DeploymentConfig { throttling: false, ..DeploymentConfig::default().with_mode(mode) };
    (Runtime::new(platform, config), fixtures)
}

fn replay(mode: Mode) -> Vec<(u16, Value)> {
    let (runtime, fixtures) = world(mode);
    let mut factories: Vec<_> =
        Endpoint::ALL.iter().map(|&e| RequestFactory::new(&fixtures, e, 7).unwrap()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let start = T0 + Micros::from_secs(60);
    (0..1000u64)
        .map(|i| {
            let k = rng.random_range(0..factories.len());
            let mut req = factories[k].build(&mut rng);
            match rng.random_range(0..10) {
                0 => {
                    req.headers.remove("authorization");
                }
                1 => req = req.bearer_str("not-a-token"),
                _ => {}
            }
            let r: Response = runtime.handle(&req, start + Micros::from_ms(i * 40)).response;
            (r.status, r.body)
        })
        .collect()
}

fn mode_equivalence() -> Outcome {
    let started = Instant::now();
    let base = replay(Mode::Monolith);
    for mode in [Mode::FaasSequenced, Mode::FaasFused] {
        let other = replay(mode);
        ensure!(other.len() == base.len(), "{mode}: length differs");
        if let Some(i) = (0..base.len()).find(|&i| base[i] != other[i]) {
            return Err(format!("{mode}: request {i} gave {:?}, monolith {:?}", other[i], base[i]));
        }
    }
    let ok = base.iter().filter(|(s, _)| *s == 200).count();
    let elapsed = started.elapsed();
    ensure!(elapsed < Duration::from_secs(60), "took {elapsed:?}");
    Ok(format!("1000 requests x 3 modes identical ({ok} ok), {elapsed:?}"))
}

fn pipeline_conservation() -> Outcome {
    let pipeline = Pipeline::new(PipelineSettings { batch_size: 37, ..PipelineSettings::default() });
    let sensors: Vec<SensorId> = (1..=10).map(SensorId).collect();
    for &s in &sensors {
        pipeline.provision_stream(s, &PayloadSchema::float()).unwrap();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut remaining = vec![1000u32; sensors.len()];
    let mut published: Vec<Vec<f64>> = vec![Vec::new(); sensors.len()];
    let mut ts = 0u64;
    while remaining.iter().any(|&r| r > 0) {
        match rng.random_range(0..10) {
            0..=6 => {
                let k = rng.random_range(0..sensors.len());
                if remaining[k] == 0 {
                    continue;
                }
                remaining[k] -= 1;
                ts += 1;
                let v: f64 = rng.random_range(-50.0..50.0);
                pipeline
                    .publish(
                        sensors[k],
                        SensorReading { sensor_id: sensors[k], timestamp: ts, payload: json!(v) },
                    )
                    .map_err(|e| e.to_string())?;
                published[k].push(v);
            }
            7 | 8 => {
                let k = rng.random_range(0..sensors.len());
                pipeline.drain(sensors[k], rng.random_range(1..3)).map_err(|e| e.to_string())?;
            }
            _ => {
                let k = rng.random_range(0..sensors.len());
                let q = pipeline.query(sensors[k], Some(5)).map_err(|e| e.to_string())?;
                ensure!(
                    q.windows(2).all(|w| w[0].timestamp > w[1].timestamp),
                    "query on {:?} not newest first",
                    sensors[k]
                );
            }
        }
        for &s in &sensors {
            let topic = pipeline.topic_records(s).unwrap();
            let index = pipeline.index_documents(s).unwrap();
            ensure!(
                index.len() <= topic.len() && index[..] == topic[..index.len()],
                "index of {s:?} is not a prefix of its topic"
            );
        }
    }
    pipeline.drain_all();
    for (k, &s) in sensors.iter().enumerate() {
        let topic = pipeline.topic_records(s).unwrap();
        let index = pipeline.index_documents(s).unwrap();
        ensure!(index == topic, "{s:?}: index differs from topic after drain");
        let values: Vec<f64> = index.iter().map(|r| r.payload.as_f64().unwrap()).collect();
        ensure!(values == published[k], "{s:?}: order or contents changed");
    }
    Ok("10 sensors x 1000 readings conserved in order".into())
}

fn cold_start() -> Outcome {
    let mut lines = Vec::new();
    for mode in [Mode::FaasSequenced, Mode::FaasFused] {
        let config = DeploymentConfig {
            idle_timeout_s: 1,
            throttling: false,
            ..DeploymentConfig::default().with_mode(mode)
        };
        let cold_ms = Micros::from_ms(config.cold_start_ms);
        let (runtime, fixtures) = world(mode);
        let runtime = Runtime::new(runtime.platform().clone(), config);
        let clock = ManualClock::new(T0 + Micros::from_secs(60));
        let mut factory = RequestFactory::new(&fixtures, Endpoint::SensorsGet, 1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut call = |clock: &ManualClock| {
            let r = runtime.handle(&factory.build(&mut rng), clock.now());
            (r.latency, r.response.headers.get(COLD_START_HEADER).cloned(), r.response.status)
        };

        let (first, h, _) = call(&clock);
        ensure!(h.as_deref() == Some("true"), "{mode}: very first request not cold");
        clock.advance(first + Micros::from_ms(100));
        let (warm, h, s) = call(&clock);
        ensure!(s == 200 && h.as_deref() == Some("false"), "{mode}: follow-up not warm");

        clock.advance(warm + Micros::from_secs(3));
        let (after_idle, h, s) = call(&clock);
        ensure!(s == 200, "{mode}: status {s} after idle");
        ensure!(h.as_deref() == Some("true"), "{mode}: request after idle not marked cold");
        ensure!(after_idle >= warm + cold_ms, "{mode}: cold {after_idle:?} < warm {warm:?} + {cold_ms:?}");
        clock.advance(after_idle);
        for _ in 0..5 {
            clock.advance(Micros::from_ms(200));
            let (l, h, _) = call(&clock);
            ensure!(h.as_deref() == Some("false"), "{mode}: warm follow-up marked cold");
            ensure!(l == warm, "{mode}: warm follow-up {l:?} differs from baseline {warm:?}");
        }
        lines.push(format!("{mode} cold {:.0} ms / warm {:.0} ms", after_idle.as_ms_f64(), warm.as_ms_f64()));
    }
    Ok(lines.join(", "))
}

/// k-th smallest by counting, without sorting.
fn kth_smallest(xs: &[f64], k: usize) -> f64 {
    *xs.iter()
        .find(|&&x| {
            let below = xs.iter().filter(|&&y| y < x).count();
            let equal = xs.iter().filter(|&&y| y == x).count();
            below <= k && k < below + equal
        })
        .unwrap()
}

fn percentile_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let n = rng.random_range(1..200);
        let xs: Vec<f64> = (0..n)
            .map(|_| {
                if rng.random_bool(0.2) {
                    rng.random_range(0..20) as f64
                } else {
                    rng.random_range(0.0..5000.0)
                }
            })
            .collect();
        let q = if rng.random_bool(0.3) { 0.95 } else { rng.random_range(0.001..=1.0) };
        let pos = (n - 1) as f64 * q;
        let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
        let (a, b) = (kth_smallest(&xs, lo), kth_smallest(&xs, hi));
        let want = a + (b - a) * (pos - lo as f64);
        let got = percentile(&xs, q).map_err(|e| e.to_string())?;
        let err = (got - want).abs();
        worst = worst.max(err);
        ensure!(err <= 1e-9, "n={n} q={q}: {got} vs oracle {want}");
    }
    Ok(format!("1000 sets, max error {worst:e}"))
}

fn hpa_properties() -> Outcome {
    let config = DeploymentConfig::default();
    let target = config.hpa_target_utilization;
    for c in 1..=config.max_replicas {
        let next = hpa_step(c, target, &config);
        ensure!(next == c, "{c} replicas at target moved to {next}");
    }
    for c in 1..=config.max_replicas {
        ensure!(hpa_step(c, 1.0e6, &config) == 40, "no clamp at 40 from {c}");
    }
    // Constant demand in replica-equivalents; utilization saturates at 100%.
    let bound = (40f64).log2().ceil() as usize + 1;
    let mut slowest = 0;
    for tenth in 1..=1000 {
        let demand = tenth as f64 / 10.0;
        let fixed = ((demand / target).ceil() as u32).clamp(1, 40);
        let mut c = 1u32;
        let mut steps = 0;
        while c != fixed {
            c = hpa_step(c, (demand / c as f64).min(1.0), &config);
            steps += 1;
            ensure!(steps <= bound, "demand {demand}: not converged after {bound} steps");
        }
        ensure!(
            hpa_step(c, (demand / c as f64).min(1.0), &config) == c,
            "demand {demand}: {c} is not stable"
        );
        slowest = slowest.max(steps);
    }
    Ok(format!("fixed point 1..=40, clamp 40, converged within {slowest} <= {bound} steps"))
}

#[derive(Debug, Clone, serde::Deserialize)]
struct PublishedRun {
    endpoint: String,
    scenario: String,
    deployment: String,
    requests: u64,
    avg_ms: f64,
    cents_per_1000: f64,
}

fn published_runs() -> Vec<PublishedRun> {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data/published_runs.csv");
    csv::Reader::from_path(path).unwrap().deserialize().collect::<Result<_, _>>().unwrap()
}

fn pricing() -> PricingConfig {
    PricingConfig::load(workspace_root().join("config/pricing.toml")).unwrap()
}

fn estimate(p: &PricingConfig, run: &PublishedRun) -> f64 {
    let report = match run.deployment.as_str() {
        "gke-50" | "gke-80" => {
            CostReport::reservation(&run.deployment, p.cluster("gke").unwrap(), p.duration_h, run.requests)
        }
        "openwhisk" => CostReport::reservation(
            &run.deployment,
            p.cluster("openwhisk").unwrap(),
            p.duration_h,
            run.requests,
        ),
        "cloud-run" => {
            let u = p.usage("cloud_run").unwrap();
            let billed = u.billed_ms(run.avg_ms) as f64 / 1000.0 * run.requests as f64;
            CostReport::pay_per_use(&run.deployment, u, run.requests, billed)
        }
        other => panic!("unknown deployment {other}"),
    };
    report.unwrap().cost_cents_per_1000_requests
}

fn within(got: f64, want: f64, tol: f64) -> bool {
    ((got - want) / want).abs() <= tol
}

fn cost_reproduction() -> Outcome {
    let p = pricing();
    let runs = published_runs();
    ensure!(runs.len() == 72, "expected 72 published runs, found {}", runs.len());
    let find = |e: &str, s: &str, d: &str| {
        runs.iter().find(|r| r.endpoint == e && r.scenario == s && r.deployment == d).unwrap()
    };
    let gke = find("sensors-get", "linear", "gke-50");
    let gcr = find("sensors-get", "linear", "cloud-run");
    let (gke_c, gcr_c) = (estimate(&p, gke), estimate(&p, gcr));
    ensure!(within(gke_c, gke.cents_per_1000, 0.25), "GKE-50 {gke_c:.4} vs {}", gke.cents_per_1000);
    ensure!(within(gcr_c, gcr.cents_per_1000, 0.25), "GCR {gcr_c:.4} vs {}", gcr.cents_per_1000);

    let mut rows = 0;
    for r in runs.iter().filter(|r| r.deployment == "cloud-run") {
        let ours = estimate(&p, r);
        for other in runs
            .iter()
            .filter(|o| o.endpoint == r.endpoint && o.scenario == r.scenario && o.deployment != "cloud-run")
        {
            let theirs = estimate(&p, other);
            ensure!(
                ours < theirs,
                "{} {}: cloud-run {ours:.4} not below {} {theirs:.4}",
                r.endpoint,
                r.scenario,
                other.deployment
            );
        }
        rows += 1;
    }
    ensure!(rows == 18, "{rows} rows compared");
    Ok(format!(
        "GKE-50 {gke_c:.4} (published {}), GCR {gcr_c:.4} (published {}), GCR cheapest on {rows}/18 rows",
        gke.cents_per_1000, gcr.cents_per_1000
    ))
}

fn break_even() -> Outcome {
    let p = pricing();
    let runs = published_runs();
    let find = |d: &str| {
        runs.iter()
            .find(|r| r.endpoint == "users-get" && r.scenario == "linear" && r.deployment == d)
            .unwrap()
    };
    let (gke, gcr) = (find("gke-50"), find("cloud-run"));
    let reservation = reservation_cost(p.cluster("gke").unwrap(), p.duration_h);
    let ratio = break_even_ratio(reservation, gke.requests, p.usage("cloud_run").unwrap(), gcr.avg_ms)
        .ok_or("no break-even point")?;
    ensure!(within(ratio, 2.24, 0.10), "ratio {ratio:.3} outside 2.24 +/- 10%");
    Ok(format!("ratio {ratio:.3} (published 2.24)"))
}

fn iot(config: &Path, args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_iot"))
        .arg("--config")
        .arg(config)
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("iot binary runs")
}

fn desk_scale_end_to_end() -> Outcome {
    let started = Instant::now();
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let root = dir.path();
    let config = root.join("iot.toml");
    std::fs::write(
        &config,
        format!(
            "[store]\npath = {:?}\n[fixtures]\npath = {:?}\n",
            root.join("store.log"),
            root.join("fixtures.json")
        ),
    )
    .map_err(|e| e.to_string())?;

    let out = iot(&config, &["seed"]);
    ensure!(out.status.success(), "seed failed: {}", String::from_utf8_lossy(&out.stderr));

    let results = root.join("results");
    let out = iot(
        &config,
        &[
            "loadtest",
            "--scenario",
            "linear",
            "--endpoint",
            "sensors-get",
            "--time-scale",
            "0.1",
            "--vu-scale",
            "0.2",
            "--mode",
            "monolith",
            "--strict",
            "--out",
            results.to_str().unwrap(),
        ],
    );
    ensure!(
        out.status.code() == Some(0),
        "loadtest exited {:?}: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    let elapsed = started.elapsed();
    ensure!(elapsed <= Duration::from_secs(180), "took {elapsed:?}");

    let csv_path = results.join("linear-sensors-get-monolith.csv");
    let text = std::fs::read_to_string(&csv_path).map_err(|e| format!("{}: {e}", csv_path.display()))?;
    let (first, body) = text.split_once('\n').ok_or("empty csv")?;
    ensure!(first.starts_with("# manifest="), "missing manifest line");
    let mut reader = csv::Reader::from_reader(body.as_bytes());
    let header: Vec<String> = reader.headers().unwrap().iter().map(str::to_owned).collect();
    ensure!(header == ["bucket_start_s", "requests", "successes", "avg_ms", "p95_ms"], "header {header:?}");
    let mut buckets = 0;
    let (mut total, mut ok) = (0u64, 0u64);
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| e.to_string())?;
        ensure!(rec.len() == 5, "row {i} has {} fields", rec.len());
        let start: u64 = rec[0].parse().map_err(|_| format!("row {i}: bad start"))?;
        ensure!(start == i as u64 * 10, "row {i} starts at {start}");
        total += rec[1].parse::<u64>().map_err(|_| format!("row {i}: bad count"))?;
        ok += rec[2].parse::<u64>().map_err(|_| format!("row {i}: bad successes"))?;
        for f in [&rec[3], &rec[4]] {
            ensure!(f.parse::<f64>().is_ok_and(f64::is_finite), "row {i}: bad latency {f}");
        }
        buckets += 1;
    }
    ensure!(buckets == 18, "{buckets} buckets");
    ensure!(total > 0 && ok == total, "{ok}/{total} requests returned 200");
    Ok(format!("{total} requests, all 200, 18 buckets, {elapsed:?}"))
}

fn main() {
    let criteria: [Criterion; 9] = [
        ("scenario exactness", scenario_exactness),
        ("mode equivalence", mode_equivalence),
        ("pipeline conservation", pipeline_conservation),
        ("cold start", cold_start),
        ("percentile oracle", percentile_oracle),
        ("hpa properties", hpa_properties),
        ("cost reproduction", cost_reproduction),
        ("break-even", break_even),
        ("desk-scale end-to-end", desk_scale_end_to_end),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.into_iter().enumerate() {
        let result = std::panic::catch_unwind(check).unwrap_or_else(|e| {
            Err(e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        match result {
            Ok(detail) => println!("PASS {} {name}: {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL {} {name}: {why}", i + 1);
            }
        }
    }
    if failed > 0 {
        eprintln!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
