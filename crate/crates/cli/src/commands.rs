use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{anyhow, bail, Context};
use iot_core::clock::{Clock, Micros, SystemClock};
use iot_core::config::Config;
use iot_core::cost::{CostReport, PricingConfig};
use iot_core::load::{
    self, read_summary, run_http, run_simulated, write_reports, Fixtures, Http, InProcess, RunManifest,
    ScenarioSpec,
};
use iot_core::runtime::Runtime;
use serde_json::Value;
use tokio::net::TcpListener;

use crate::{Cli, Command, CostArgs, Failure, LoadtestArgs, ReportArgs, SeedArgs, ServeArgs};

pub fn run(cli: Cli) -> Result<(), Failure> {
    let config = Config::resolve(cli.config.as_deref()).context("loading configuration")?;
    let rt = tokio::runtime::Runtime::new().context("starting async runtime")?;
    match cli.command {
        Command::Serve(a) => rt.block_on(serve(config, a)).map_err(Failure::Runtime),
        Command::Seed(a) => rt.block_on(seed(config, a)).map_err(Failure::Runtime),
        Command::Loadtest(a) => rt.block_on(loadtest(config, a)),
        Command::Cost(a) => cost(a).map_err(Failure::Runtime),
        Command::Report(a) => report(a).map_err(Failure::Runtime),
    }
}

async fn serve(mut config: Config, args: ServeArgs) -> anyhow::Result<()> {
    if let Some(m) = args.mode {
        config.runtime.mode = m;
    }
    let bind = args.bind.unwrap_or_else(|| config.server.bind.clone());
    let listener = TcpListener::bind(&bind).await.with_context(|| format!("binding {bind}"))?;
    let platform =
        config.open_platform().with_context(|| format!("opening store {}", config.store.path.display()))?;
    let clock: Arc<dyn Clock> = Arc::new(SystemClock);
    let _pump = platform.pipeline_arc().spawn_pump(clock.clone());
    let mode = config.runtime.mode;
    let runtime = Arc::new(Runtime::new(platform, config.runtime));
    tracing::info!(%mode, addr = %listener.local_addr()?, "serving");
    iot_core::server::serve(listener, runtime, clock, !args.no_hold, async {
        let _ = tokio::signal::ctrl_c().await;
    })
    .await
    .context("serving")?;
    Ok(())
}

async fn seed(config: Config, args: SeedArgs) -> anyhow::Result<()> {
    let count = args.count.unwrap_or(config.fixtures.count);
    let out = args.out.unwrap_or_else(|| config.fixtures.path.clone());
    let previous = out.exists().then(|| Fixtures::load(&out)).transpose()?;
    let admin = (config.auth.admin_username.as_str(), config.auth.admin_password.as_str());
    let now = SystemClock.now();
    let fixtures = match &args.target {
        Some(url) => load::seed(&Http::new(url.as_str()), count, admin, previous.as_ref(), now).await?,
        None => {
            let platform = config
                .open_platform()
                .with_context(|| format!("opening store {}", config.store.path.display()))?;
            let transport = InProcess::new(platform, Arc::new(SystemClock));
            load::seed(&transport, count, admin, previous.as_ref(), now).await?
        }
    };
    fixtures.save(&out)?;
    println!("seeded {} fixture users -> {}", fixtures.users.len(), out.display());
    Ok(())
}

/// Configuration as recorded in run manifests, without credentials.
fn redacted(config: &Config) -> Value {
    let mut v = serde_json::to_value(config).expect("config serializes");
    v["auth"]["secret"] = Value::from("<redacted>");
    v["auth"]["admin_password"] = Value::from("<redacted>");
    v
}

/// First whole minute at least one minute after `t`.
fn aligned_start(t: Micros) -> Micros {
    let minute = 60_000_000;
    Micros((t.0 / minute + 2) * minute)
}

async fn loadtest(mut config: Config, args: LoadtestArgs) -> Result<(), Failure> {
    if let Some(m) = args.mode {
        config.runtime.mode = m;
    }
    let spec = ScenarioSpec::canonical(args.scenario).scaled(args.time_scale, args.vu_scale);
    spec.validate().map_err(|e| anyhow!(e))?;
    let fixtures_path = args.fixtures.clone().unwrap_or_else(|| config.fixtures.path.clone());
    let fixtures = Fixtures::load(&fixtures_path)
        .map_err(|e| anyhow!(e))
        .context("fixtures missing; run `iot seed` first")?;

    let mode = match &args.target {
        Some(url) => remote_mode(url).await.unwrap_or_else(|| "unknown".into()),
        None => config.runtime.mode.to_string(),
    };
    let stem = format!("{}-{}-{}", args.scenario, args.endpoint.slug(), mode);
    let mut manifest = RunManifest {
        config: redacted(&config),
        scenario: args.scenario.to_string(),
        endpoint: args.endpoint.slug().to_owned(),
        seed: args.seed,
        mode: mode.clone(),
        time_scale: args.time_scale,
        vu_scale: args.vu_scale,
        target: args.target.clone().unwrap_or_else(|| "embedded".into()),
        csv_path: args.out.join(format!("{stem}.csv")),
        json_path: args.out.join(format!("{stem}.json")),
        started_at_us: Some(SystemClock.now().0),
        finished_at_us: None,
    };
    tracing::info!(
        scenario = %args.scenario,
        endpoint = args.endpoint.slug(),
        %mode,
        duration_s = spec.duration_s(),
        "starting load run"
    );

    let report = match &args.target {
        None => {
            let platform = config.snapshot_platform().map_err(|e| anyhow!(e))?;
            let runtime = Runtime::new(platform, config.runtime.clone());
            let start = aligned_start(fixtures.issued_at);
            run_simulated(&runtime, &spec, args.endpoint, &fixtures, args.seed, start)
                .map_err(|e| anyhow!(e))?
                .report
        }
        Some(url) => {
            let nonce = SystemClock.now().0;
            run_http(
                Arc::new(Http::new(url.as_str())),
                &spec,
                args.endpoint,
                Arc::new(fixtures),
                args.seed,
                nonce,
            )
            .await
            .map_err(|e| anyhow!(e))?
        }
    };
    manifest.finished_at_us = Some(SystemClock.now().0);
    let summary = write_reports(&report, &manifest).context("writing reports")?;
    println!(
        "{} requests, {} ok ({:.2}%), avg {:.2} ms, p95 {:.2} ms\ncsv: {}\njson: {}",
        report.total_requests,
        report.successes,
        report.success_rate() * 100.0,
        report.average_ms,
        report.p95_ms,
        manifest.csv_path.display(),
        manifest.json_path.display(),
    );
    tracing::debug!(hash = %summary.manifest_hash, "reports written");
    if report.incomplete {
        return Err(Failure::Runtime(anyhow!("run aborted: connection to the service failed")));
    }
    if args.strict && !report.all_succeeded() {
        return Err(Failure::Strict(format!(
            "{} of {} requests did not answer 200",
            report.total_requests - report.successes,
            report.total_requests
        )));
    }
    Ok(())
}

async fn remote_mode(url: &str) -> Option<String> {
    let body = Http::new(url).health().await?;
    body["mode"].as_str().map(str::to_owned)
}

fn cost(args: CostArgs) -> anyhow::Result<()> {
    let pricing = PricingConfig::load(&args.pricing)?;
    let (requests, avg_ms, run_h) = match (&args.metrics, args.requests, args.avg_ms) {
        (Some(path), _, _) => {
            let s = read_summary(path).with_context(|| format!("reading {}", path.display()))?;
            (s.report.total_requests, s.report.average_ms, Some(s.report.duration_s / 3600.0))
        }
        (None, Some(n), Some(avg)) => (n, avg, None),
        _ => bail!("give --metrics or both --requests and --avg-ms"),
    };
    let name = args.deployment.as_str();
    let report = if let Some(c) = pricing.cluster.get(name) {
        let hours = args.duration_h.or(run_h).unwrap_or(pricing.duration_h);
        CostReport::reservation(name, c, hours, requests)?
    } else if let Some(u) = pricing.usage.get(name) {
        let billed = u.billed_ms(avg_ms) as f64 / 1000.0 * requests as f64;
        CostReport::pay_per_use(name, u, requests, billed)?
    } else {
        bail!("{name:?} is neither a [cluster.*] nor a [usage.*] entry of {}", args.pricing.display());
    };
    println!("{}", crate::table::cost_table(&report));
    let json = serde_json::to_string_pretty(&report)?;
    match &args.out {
        Some(p) => write_out(p, &json)?,
        None => println!("{json}"),
    }
    Ok(())
}

fn write_out(path: &Path, text: &str) -> anyhow::Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn report(args: ReportArgs) -> anyhow::Result<()> {
    let mut rows = Vec::new();
    for p in &args.runs {
        let path: PathBuf =
            if p.extension().is_some_and(|e| e == "csv") { p.with_extension("json") } else { p.clone() };
        rows.push(read_summary(&path).with_context(|| format!("reading {}", path.display()))?);
    }
    println!("{}", crate::table::runs_table(&rows));
    Ok(())
}
