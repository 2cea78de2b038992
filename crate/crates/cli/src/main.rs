//! `iot`: serve the platform, seed fixtures, run load scenarios and price the runs.

mod commands;
mod table;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use iot_core::api::Endpoint;
use iot_core::load::ScenarioKind;
use iot_core::runtime::Mode;

/// Exit code for usage errors.
const EXIT_USAGE: u8 = 1;
/// Exit code for failures at run time (bind, I/O, unreachable service).
const EXIT_RUNTIME: u8 = 2;
/// Exit code when `--strict` is set and some request did not succeed.
const EXIT_STRICT: u8 = 3;

#[derive(Debug, Parser)]
#[command(name = "iot", version, about)]
struct Cli {
    /// Configuration file; falls back to $IOT_CONFIG, then built-in defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Serve the HTTP API with the chosen deployment runtime.
    Serve(ServeArgs),
    /// Provision dummy users, devices, sensors and consumers.
    Seed(SeedArgs),
    /// Run a load scenario and write CSV and JSON reports.
    Loadtest(LoadtestArgs),
    /// Price a run from its JSON summary.
    Cost(CostArgs),
    /// Tabulate JSON summaries of earlier runs.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
struct ServeArgs {
    #[arg(long, value_parser = parse_mode)]
    mode: Option<Mode>,
    /// Listen address, overriding `server.bind`.
    #[arg(long)]
    bind: Option<String>,
    /// Answer immediately instead of holding responses for the modeled latency.
    #[arg(long)]
    no_hold: bool,
}

#[derive(Debug, Args)]
struct SeedArgs {
    /// Number of fixture users (default: `fixtures.count`).
    #[arg(long)]
    count: Option<usize>,
    /// Base URL of a running server; without it the durable store is seeded directly.
    #[arg(long)]
    target: Option<String>,
    /// Fixtures file (default: `fixtures.path`).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct LoadtestArgs {
    #[arg(long, value_parser = parse_scenario)]
    scenario: ScenarioKind,
    #[arg(long, value_parser = parse_endpoint)]
    endpoint: Endpoint,
    #[arg(long, default_value_t = 1.0)]
    time_scale: f64,
    #[arg(long, default_value_t = 1.0)]
    vu_scale: f64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Runtime for the embedded run (default: `runtime.mode`). Ignored with --target.
    #[arg(long, value_parser = parse_mode)]
    mode: Option<Mode>,
    /// Base URL of a running server; without it the run is simulated in-process.
    #[arg(long)]
    target: Option<String>,
    /// Fixtures file (default: `fixtures.path`).
    #[arg(long)]
    fixtures: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = "results")]
    out: PathBuf,
    /// Exit with code 3 unless every request answered 200.
    #[arg(long)]
    strict: bool,
}

#[derive(Debug, Args)]
struct CostArgs {
    /// JSON summary written by `loadtest`.
    #[arg(long, required_unless_present = "requests")]
    metrics: Option<PathBuf>,
    /// Request count, instead of --metrics.
    #[arg(long, requires = "avg_ms", conflicts_with = "metrics")]
    requests: Option<u64>,
    /// Average request duration in ms, instead of --metrics.
    #[arg(long, requires = "requests")]
    avg_ms: Option<f64>,
    #[arg(long, default_value = "config/pricing.toml")]
    pricing: PathBuf,
    /// Entry under `[cluster.*]` or `[usage.*]` of the pricing file.
    #[arg(long)]
    deployment: String,
    /// Run length for reservation pricing (default: the run's own duration,
    /// or `duration_h` from the pricing file).
    #[arg(long)]
    duration_h: Option<f64>,
    /// Write the cost report JSON here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ReportArgs {
    /// JSON summaries (a `.csv` path is read from its sibling `.json`).
    #[arg(required = true)]
    runs: Vec<PathBuf>,
}

fn parse_mode(s: &str) -> Result<Mode, String> {
    s.parse()
}

fn parse_scenario(s: &str) -> Result<ScenarioKind, String> {
    s.parse()
}

fn parse_endpoint(s: &str) -> Result<Endpoint, String> {
    s.parse().map_err(|e: iot_core::api::UnknownEndpoint| e.to_string())
}

pub enum Failure {
    Runtime(anyhow::Error),
    Strict(String),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Runtime(e)
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_USAGE) } else { ExitCode::SUCCESS };
        }
    };
    tracing_subscriber::fmt()
        .with_writer(std::io::stderr)
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env()
                .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new("info")),
        )
        .init();

    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_RUNTIME)
        }
        Err(Failure::Strict(msg)) => {
            eprintln!("strict: {msg}");
            ExitCode::from(EXIT_STRICT)
        }
    }
}
