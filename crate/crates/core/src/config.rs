//! Service configuration file.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::auth::TokenAuthority;
use crate::clock::Micros;
use crate::load::DEFAULT_FIXTURE_COUNT;
use crate::model::Store;
use crate::pipeline::{Pipeline, PipelineSettings};
use crate::platform::Platform;
use crate::runtime::DeploymentConfig;

pub const CONFIG_ENV: &str = "IOT_CONFIG";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StoreConfig {
    pub path: PathBuf,
}

impl Default for StoreConfig {
    fn default() -> Self {
        Self { path: "data/store.log".into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AuthConfig {
    pub secret: String,
    /// Token lifetime; absent means tokens never expire.
    pub ttl_seconds: Option<u64>,
    pub admin_username: String,
    pub admin_password: String,
}

impl Default for AuthConfig {
    fn default() -> Self {
        Self {
            secret: "change-me".into(),
            ttl_seconds: Some(7 * 24 * 3600),
            admin_username: "admin".into(),
            admin_password: "admin".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub sync_read: bool,
    pub drain_interval_ms: u64,
    pub batch_size: usize,
    pub query_limit: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        let d = PipelineSettings::default();
        Self {
            sync_read: false,
            drain_interval_ms: d.drain_interval.as_millis(),
            batch_size: d.batch_size,
            query_limit: d.query_limit,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServerConfig {
    pub bind: String,
}

impl Default for ServerConfig {
    fn default() -> Self {
        Self { bind: "127.0.0.1:8080".into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FixturesConfig {
    pub path: PathBuf,
    pub count: usize,
}

impl Default for FixturesConfig {
    fn default() -> Self {
        Self { path: "data/fixtures.json".into(), count: DEFAULT_FIXTURE_COUNT }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub store: StoreConfig,
    pub auth: AuthConfig,
    pub pipeline: PipelineConfig,
    pub runtime: DeploymentConfig,
    pub server: ServerConfig,
    pub fixtures: FixturesConfig,
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

impl Config {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        Self::parse_at(text, Path::new("<inline>"))
    }

    fn parse_at(text: &str, path: &Path) -> Result<Self, ConfigError> {
        let cfg: Config = toml::from_str(text)
            .map_err(|e| ConfigError::Parse { path: path.to_owned(), message: e.to_string() })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|source| ConfigError::Read { path: path.to_owned(), source })?;
        Self::parse_at(&text, path)
    }

    /// Loads `explicit`, else the file named by `IOT_CONFIG`, else defaults.
    pub fn resolve(explicit: Option<&Path>) -> Result<Self, ConfigError> {
        match explicit {
            Some(p) => Self::load(p),
            None => match std::env::var_os(CONFIG_ENV) {
                Some(p) => Self::load(PathBuf::from(p)),
                None => Ok(Self::default()),
            },
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.runtime.validate().map_err(ConfigError::Invalid)?;
        if self.auth.secret.is_empty() {
            return Err(ConfigError::Invalid("auth.secret must not be empty".into()));
        }
        if self.pipeline.batch_size == 0 || self.pipeline.drain_interval_ms == 0 {
            return Err(ConfigError::Invalid(
                "pipeline.batch_size and pipeline.drain_interval_ms must be > 0".into(),
            ));
        }
        Ok(())
    }

    pub fn pipeline_settings(&self) -> PipelineSettings {
        PipelineSettings {
            batch_size: self.pipeline.batch_size,
            drain_interval: Micros::from_ms(self.pipeline.drain_interval_ms),
            query_limit: self.pipeline.query_limit,
        }
    }

    pub fn token_authority(&self) -> TokenAuthority {
        TokenAuthority::new(self.auth.secret.as_bytes().to_vec(), self.auth.ttl_seconds)
    }

    fn assemble(&self, store: Store) -> crate::Result<Platform> {
        let platform = Platform::new(
            Arc::new(store),
            Arc::new(Pipeline::new(self.pipeline_settings())),
            self.token_authority(),
        )
        .with_sync_read(self.pipeline.sync_read);
        platform.bootstrap_admin(&self.auth.admin_username, &self.auth.admin_password)?;
        Ok(platform)
    }

    /// Platform over the durable store; every mutation is journaled.
    pub fn open_platform(&self) -> crate::Result<Platform> {
        self.assemble(Store::open(&self.store.path)?)
    }

    /// Platform over a private in-memory copy of the durable store, if any.
    pub fn snapshot_platform(&self) -> crate::Result<Platform> {
        let store = if self.store.path.exists() {
            Store::load_snapshot(&self.store.path)?
        } else {
            Store::in_memory()
        };
        self.assemble(store)
    }
}
