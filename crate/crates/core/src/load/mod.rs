//! Virtual-user load generation and latency metrics.

mod fixtures;
mod http;
mod metrics;
mod output;
mod scenario;
mod sim;
mod transport;

pub use fixtures::{
    fixture_username, seed, FixtureUser, Fixtures, NoFixtures, RequestFactory, SeedError,
    DEFAULT_FIXTURE_COUNT,
};
pub use http::run_http;
pub use metrics::{bucketize, percentile, Bucket, MetricsReport, PercentileError, Sample, BUCKET_WIDTH_S};
pub use output::{read_summary, render_csv, write_reports, RunManifest, RunSummary, CSV_HEADER};
pub use scenario::{ScenarioError, ScenarioKind, ScenarioSpec};
pub use sim::{run_simulated, SimOutcome, TickSample};
pub use transport::{Http, InProcess, Transport, TransportError};

use crate::clock::Micros;

/// VU scheduler period.
pub const TICK: Micros = Micros::from_ms(100);

#[derive(Debug, thiserror::Error)]
pub enum LoadError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    NoFixtures(#[from] NoFixtures),
}
