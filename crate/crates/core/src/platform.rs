use std::sync::Arc;

use crate::auth::{Claims, TokenAuthority};
use crate::error::{Error, Result};
use crate::model::{DeviceId, PayloadSchema, Role, SensorId, Store, UserId};
use crate::pipeline::Pipeline;

/// The stateful part of the platform that every handler unit reads and
/// writes: entity store, ingest pipeline and token authority.
#[derive(Debug, Clone)]
pub struct Platform {
    store: Arc<Store>,
    pipeline: Arc<Pipeline>,
    tokens: TokenAuthority,
    sync_read: bool,
}

impl Platform {
    /// Wraps existing components and provisions a stream for every sensor the
    /// store already knows about (e.g. after replaying a durable log).
    pub fn new(store: Arc<Store>, pipeline: Arc<Pipeline>, tokens: TokenAuthority) -> Self {
        for s in store.sensors() {
            if !pipeline.is_provisioned(s.id) {
                pipeline.provision_stream(s.id, &s.schema).expect("stream absent was just checked");
            }
        }
        Self { store, pipeline, tokens, sync_read: false }
    }

    pub fn in_memory(secret: &[u8]) -> Self {
        Self::new(
            Arc::new(Store::in_memory()),
            Arc::new(Pipeline::default()),
            TokenAuthority::new(secret.to_vec(), None),
        )
    }

    /// When set, consume requests drain the sensor's stream before querying.
    pub fn with_sync_read(mut self, on: bool) -> Self {
        self.sync_read = on;
        self
    }

    pub fn sync_read(&self) -> bool {
        self.sync_read
    }

    pub fn store(&self) -> &Store {
        &self.store
    }

    pub fn pipeline(&self) -> &Pipeline {
        &self.pipeline
    }

    pub fn pipeline_arc(&self) -> Arc<Pipeline> {
        Arc::clone(&self.pipeline)
    }

    pub fn tokens(&self) -> &TokenAuthority {
        &self.tokens
    }

    /// Creates the sensor and its topic, index and connector as one step.
    pub fn create_sensor(
        &self,
        actor: &Claims,
        device: DeviceId,
        name: &str,
        schema: PayloadSchema,
    ) -> Result<SensorId> {
        self.store.create_sensor(actor, device, name, schema, |id, schema| {
            self.pipeline.provision_stream(id, schema)
        })
    }

    pub fn delete_sensor(&self, actor: &Claims, id: SensorId) -> Result<()> {
        self.store.delete_sensor(actor, id, |id| self.pipeline.deprovision_stream(id))
    }

    /// Ensures an admin account with these credentials exists.
    pub fn bootstrap_admin(&self, username: &str, password: &str) -> Result<UserId> {
        match self.store.insert_user("admin", username, password, Role::Admin) {
            Ok(id) => Ok(id),
            Err(Error::Conflict(_)) => self
                .store
                .find_user_by_username(username)
                .filter(|u| u.role == Role::Admin)
                .map(|u| u.id)
                .ok_or_else(|| Error::Conflict(format!("{username} exists and is not an admin"))),
            Err(e) => Err(e),
        }
    }
}
