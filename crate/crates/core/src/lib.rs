//! IoT platform whose request handling runs as a monolith or as
//! function-decomposed pools, with a virtual-user load harness, latency
//! metrics and a deployment cost model.

pub mod api;
pub mod auth;
pub mod clock;
pub mod config;
pub mod cost;
pub mod error;
pub mod load;
pub mod model;
pub mod pipeline;
pub mod platform;
pub mod runtime;
pub mod server;

pub use error::{Error, Result};
pub use platform::Platform;
