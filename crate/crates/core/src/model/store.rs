use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::Path;
use std::sync::{RwLock, RwLockReadGuard, RwLockWriteGuard};

use super::journal::{FileJournal, Journal, MemoryJournal, Mutation};
use super::{
    Consumer, ConsumerId, Device, DeviceId, Grant, PayloadSchema, Role, Sensor, SensorId, User, UserId,
};
use crate::auth::{hash_password, Claims};
use crate::error::{Error, Result};

/// Full entity state. Two stores hold the same entities iff their tables compare equal.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Tables {
    pub users: BTreeMap<UserId, User>,
    pub devices: BTreeMap<DeviceId, Device>,
    pub sensors: BTreeMap<SensorId, Sensor>,
    pub consumers: BTreeMap<ConsumerId, Consumer>,
    pub grants: BTreeSet<Grant>,
    usernames: HashMap<String, UserId>,
    next_user: u64,
    next_device: u64,
    next_sensor: u64,
    next_consumer: u64,
}

impl Tables {
    fn issue_user_id(&self) -> UserId {
        UserId(self.next_user.max(1))
    }
    fn issue_device_id(&self) -> DeviceId {
        DeviceId(self.next_device.max(1))
    }
    fn issue_sensor_id(&self) -> SensorId {
        SensorId(self.next_sensor.max(1))
    }
    fn issue_consumer_id(&self) -> ConsumerId {
        ConsumerId(self.next_consumer.max(1))
    }

    fn apply(&mut self, m: Mutation) {
        match m {
            Mutation::UserCreated(u) => {
                self.next_user = self.next_user.max(u.id.0 + 1);
                self.usernames.insert(u.username.clone(), u.id);
                self.users.insert(u.id, u);
            }
            Mutation::DeviceCreated(d) => {
                self.next_device = self.next_device.max(d.id.0 + 1);
                self.devices.insert(d.id, d);
            }
            Mutation::SensorCreated(s) => {
                self.next_sensor = self.next_sensor.max(s.id.0 + 1);
                self.sensors.insert(s.id, s);
            }
            Mutation::ConsumerCreated(c) => {
                self.next_consumer = self.next_consumer.max(c.id.0 + 1);
                self.consumers.insert(c.id, c);
            }
            Mutation::GrantAdded(g) => {
                self.grants.insert(g);
            }
            Mutation::GrantRevoked(g) => {
                self.grants.remove(&g);
            }
            Mutation::UserDeleted { id } => {
                if let Some(u) = self.users.remove(&id) {
                    self.usernames.remove(&u.username);
                }
            }
            Mutation::DeviceDeleted { id } => {
                self.devices.remove(&id);
            }
            Mutation::SensorDeleted { id } => {
                self.sensors.remove(&id);
            }
            Mutation::ConsumerDeleted { id } => {
                self.consumers.remove(&id);
            }
            Mutation::DeviceRenamed { id, name } => {
                if let Some(d) = self.devices.get_mut(&id) {
                    d.name = name;
                }
            }
            Mutation::SensorRenamed { id, name } => {
                if let Some(s) = self.sensors.get_mut(&id) {
                    s.name = name;
                }
            }
            Mutation::ConsumerRenamed { id, name } => {
                if let Some(c) = self.consumers.get_mut(&id) {
                    c.name = name;
                }
            }
        }
    }

    fn device(&self, id: DeviceId) -> Result<&Device> {
        self.devices.get(&id).ok_or_else(|| Error::not_found("device", id.0))
    }

    fn sensor(&self, id: SensorId) -> Result<&Sensor> {
        self.sensors.get(&id).ok_or_else(|| Error::not_found("sensor", id.0))
    }

    fn consumer(&self, id: ConsumerId) -> Result<&Consumer> {
        self.consumers.get(&id).ok_or_else(|| Error::not_found("consumer", id.0))
    }

    /// The acting user, which must still exist.
    fn actor(&self, claims: &Claims) -> Result<UserId> {
        let id = claims.user_id()?;
        if self.users.contains_key(&id) {
            Ok(id)
        } else {
            Err(Error::Unauthorized)
        }
    }

    fn owned_device(&self, claims: &Claims, id: DeviceId) -> Result<&Device> {
        let owner = self.actor(claims)?;
        let d = self.device(id)?;
        if d.owner_user_id != owner {
            return Err(Error::Forbidden);
        }
        Ok(d)
    }

    fn owned_sensor(&self, claims: &Claims, id: SensorId) -> Result<&Sensor> {
        self.actor(claims)?;
        let s = self.sensor(id)?;
        self.owned_device(claims, s.device_id)?;
        Ok(s)
    }

    fn owned_consumer(&self, claims: &Claims, id: ConsumerId) -> Result<&Consumer> {
        let owner = self.actor(claims)?;
        let c = self.consumer(id)?;
        if c.owner_user_id != owner {
            return Err(Error::Forbidden);
        }
        Ok(c)
    }

    /// Every violated reference, as human-readable descriptions. Empty when consistent.
    pub fn integrity_violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        for d in self.devices.values() {
            if !self.users.contains_key(&d.owner_user_id) {
                out.push(format!("device {} -> missing user {}", d.id, d.owner_user_id));
            }
        }
        for s in self.sensors.values() {
            if !self.devices.contains_key(&s.device_id) {
                out.push(format!("sensor {} -> missing device {}", s.id, s.device_id));
            }
        }
        for c in self.consumers.values() {
            if !self.users.contains_key(&c.owner_user_id) {
                out.push(format!("consumer {} -> missing user {}", c.id, c.owner_user_id));
            }
        }
        for g in &self.grants {
            if !self.consumers.contains_key(&g.consumer_id) || !self.sensors.contains_key(&g.sensor_id) {
                out.push(format!("grant {:?} dangling", g));
            }
        }
        let mut seen = HashMap::new();
        for u in self.users.values() {
            if let Some(prev) = seen.insert(u.username.as_str(), u.id) {
                out.push(format!("username {} shared by {} and {}", u.username, prev, u.id));
            }
        }
        out
    }
}

/// Thread-safe entity store. Every mutating operation is validated, written
/// to the journal, and only then applied, all under one write lock.
pub struct Store {
    tables: RwLock<Tables>,
    journal: Box<dyn Journal>,
}

impl std::fmt::Debug for Store {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Store").finish_non_exhaustive()
    }
}

impl Default for Store {
    fn default() -> Self {
        Self::in_memory()
    }
}

impl Store {
    pub fn in_memory() -> Self {
        Self::with_journal(MemoryJournal, Vec::new())
    }

    /// Opens the durable store at `path`, replaying any existing log.
    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        let (journal, history) = FileJournal::open(path)?;
        Ok(Self::with_journal(journal, history))
    }

    /// Replays the log at `path` into a memory-only store; later changes are not persisted.
    pub fn load_snapshot(path: impl AsRef<Path>) -> Result<Self> {
        let (_, history) = FileJournal::open(path)?;
        Ok(Self::with_journal(MemoryJournal, history))
    }

    pub fn with_journal(journal: impl Journal + 'static, history: Vec<Mutation>) -> Self {
        let mut tables = Tables::default();
        for m in history {
            tables.apply(m);
        }
        Self { tables: RwLock::new(tables), journal: Box::new(journal) }
    }

    fn read(&self) -> RwLockReadGuard<'_, Tables> {
        self.tables.read().unwrap_or_else(|p| p.into_inner())
    }

    fn write(&self) -> RwLockWriteGuard<'_, Tables> {
        self.tables.write().unwrap_or_else(|p| p.into_inner())
    }

    fn commit(&self, tables: &mut Tables, m: Mutation) -> Result<()> {
        self.journal.append(&m)?;
        tables.apply(m);
        Ok(())
    }

    pub fn snapshot(&self) -> Tables {
        self.read().clone()
    }

    // ---- user management ----

    pub fn create_user(
        &self,
        actor: &Claims,
        name: &str,
        username: &str,
        password: &str,
        role: Role,
    ) -> Result<UserId> {
        if !actor.is_admin() {
            return Err(Error::Forbidden);
        }
        self.insert_user(name, username, password, role)
    }

    /// Creates a user without an acting admin. Used to bootstrap the first admin.
    pub fn insert_user(&self, name: &str, username: &str, password: &str, role: Role) -> Result<UserId> {
        if username.trim().is_empty() || password.is_empty() {
            return Err(Error::Invalid("username and password must be non-empty".into()));
        }
        let password_hash = hash_password(password);
        let mut t = self.write();
        if t.usernames.contains_key(username) {
            return Err(Error::Conflict(format!("username {username} taken")));
        }
        let id = t.issue_user_id();
        let user = User { id, name: name.to_owned(), username: username.to_owned(), password_hash, role };
        self.commit(&mut t, Mutation::UserCreated(user))?;
        Ok(id)
    }

    pub fn list_users(&self, actor: &Claims) -> Result<Vec<User>> {
        if !actor.is_admin() {
            return Err(Error::Forbidden);
        }
        Ok(self.read().users.values().cloned().collect())
    }

    pub fn find_user_by_username(&self, username: &str) -> Option<User> {
        let t = self.read();
        t.usernames.get(username).and_then(|id| t.users.get(id)).cloned()
    }

    pub fn user(&self, id: UserId) -> Result<User> {
        self.read().users.get(&id).cloned().ok_or_else(|| Error::not_found("user", id.0))
    }

    /// Admin-only; rejected while the user still owns devices or consumers.
    pub fn delete_user(&self, actor: &Claims, id: UserId) -> Result<()> {
        if !actor.is_admin() {
            return Err(Error::Forbidden);
        }
        let mut t = self.write();
        if !t.users.contains_key(&id) {
            return Err(Error::not_found("user", id.0));
        }
        let referenced = t.devices.values().any(|d| d.owner_user_id == id)
            || t.consumers.values().any(|c| c.owner_user_id == id);
        if referenced {
            return Err(Error::Conflict(format!("user {id} still owns entities")));
        }
        self.commit(&mut t, Mutation::UserDeleted { id })
    }

    // ---- devices ----

    pub fn create_device(&self, actor: &Claims, name: &str) -> Result<DeviceId> {
        let mut t = self.write();
        let owner = t.actor(actor)?;
        let id = t.issue_device_id();
        let device = Device { id, owner_user_id: owner, name: name.to_owned() };
        self.commit(&mut t, Mutation::DeviceCreated(device))?;
        Ok(id)
    }

    pub fn list_devices(&self, actor: &Claims) -> Result<Vec<Device>> {
        let t = self.read();
        let owner = t.actor(actor)?;
        Ok(t.devices.values().filter(|d| d.owner_user_id == owner).cloned().collect())
    }

    pub fn device(&self, id: DeviceId) -> Result<Device> {
        self.read().device(id).cloned()
    }

    pub fn rename_device(&self, actor: &Claims, id: DeviceId, name: &str) -> Result<()> {
        let mut t = self.write();
        t.owned_device(actor, id)?;
        self.commit(&mut t, Mutation::DeviceRenamed { id, name: name.to_owned() })
    }

    /// Rejected while sensors are attached to the device.
    pub fn delete_device(&self, actor: &Claims, id: DeviceId) -> Result<()> {
        let mut t = self.write();
        t.owned_device(actor, id)?;
        if t.sensors.values().any(|s| s.device_id == id) {
            return Err(Error::Conflict(format!("device {id} still has sensors")));
        }
        self.commit(&mut t, Mutation::DeviceDeleted { id })
    }

    // ---- sensors ----

    /// Creates a sensor on an owned device. `provision` runs under the store's
    /// write lock with the new id; the sensor is only recorded if it succeeds.
    pub fn create_sensor(
        &self,
        actor: &Claims,
        device: DeviceId,
        name: &str,
        schema: PayloadSchema,
        provision: impl FnOnce(SensorId, &PayloadSchema) -> Result<()>,
    ) -> Result<SensorId> {
        let mut t = self.write();
        t.owned_device(actor, device)?;
        schema.check()?;
        let id = t.issue_sensor_id();
        provision(id, &schema)?;
        let sensor = Sensor { id, device_id: device, name: name.to_owned(), schema };
        self.commit(&mut t, Mutation::SensorCreated(sensor))?;
        Ok(id)
    }

    pub fn list_sensors(&self, actor: &Claims, device: DeviceId) -> Result<Vec<Sensor>> {
        let t = self.read();
        t.owned_device(actor, device)?;
        Ok(t.sensors.values().filter(|s| s.device_id == device).cloned().collect())
    }

    pub fn sensor(&self, id: SensorId) -> Result<Sensor> {
        self.read().sensor(id).cloned()
    }

    pub fn sensors(&self) -> Vec<Sensor> {
        self.read().sensors.values().cloned().collect()
    }

    pub fn rename_sensor(&self, actor: &Claims, id: SensorId, name: &str) -> Result<()> {
        let mut t = self.write();
        t.owned_sensor(actor, id)?;
        self.commit(&mut t, Mutation::SensorRenamed { id, name: name.to_owned() })
    }

    /// Rejected while any consumer holds a grant on the sensor. `deprovision`
    /// runs under the write lock before the deletion is recorded.
    pub fn delete_sensor(
        &self,
        actor: &Claims,
        id: SensorId,
        deprovision: impl FnOnce(SensorId) -> Result<()>,
    ) -> Result<()> {
        let mut t = self.write();
        t.owned_sensor(actor, id)?;
        if t.grants.iter().any(|g| g.sensor_id == id) {
            return Err(Error::Conflict(format!("sensor {id} is granted to consumers")));
        }
        deprovision(id)?;
        self.commit(&mut t, Mutation::SensorDeleted { id })
    }

    // ---- consumers ----

    pub fn create_consumer(&self, actor: &Claims, name: &str) -> Result<ConsumerId> {
        let mut t = self.write();
        let owner = t.actor(actor)?;
        let id = t.issue_consumer_id();
        let consumer = Consumer { id, owner_user_id: owner, name: name.to_owned() };
        self.commit(&mut t, Mutation::ConsumerCreated(consumer))?;
        Ok(id)
    }

    pub fn consumer(&self, id: ConsumerId) -> Result<Consumer> {
        self.read().consumer(id).cloned()
    }

    pub fn rename_consumer(&self, actor: &Claims, id: ConsumerId, name: &str) -> Result<()> {
        let mut t = self.write();
        t.owned_consumer(actor, id)?;
        self.commit(&mut t, Mutation::ConsumerRenamed { id, name: name.to_owned() })
    }

    /// Rejected while the consumer holds grants.
    pub fn delete_consumer(&self, actor: &Claims, id: ConsumerId) -> Result<()> {
        let mut t = self.write();
        t.owned_consumer(actor, id)?;
        if t.grants.iter().any(|g| g.consumer_id == id) {
            return Err(Error::Conflict(format!("consumer {id} holds grants")));
        }
        self.commit(&mut t, Mutation::ConsumerDeleted { id })
    }

    // ---- grants ----

    /// Grants `consumer` read access to `sensor`. Re-granting is a no-op.
    pub fn enable_consumer_sensor(
        &self,
        actor: &Claims,
        consumer: ConsumerId,
        sensor: SensorId,
    ) -> Result<()> {
        let mut t = self.write();
        t.owned_consumer(actor, consumer)?;
        t.owned_sensor(actor, sensor)?;
        let g = Grant { consumer_id: consumer, sensor_id: sensor };
        if t.grants.contains(&g) {
            return Ok(());
        }
        self.commit(&mut t, Mutation::GrantAdded(g))
    }

    pub fn revoke_consumer_sensor(
        &self,
        actor: &Claims,
        consumer: ConsumerId,
        sensor: SensorId,
    ) -> Result<()> {
        let mut t = self.write();
        t.owned_consumer(actor, consumer)?;
        let g = Grant { consumer_id: consumer, sensor_id: sensor };
        if !t.grants.contains(&g) {
            return Err(Error::NotFound(format!("grant {consumer}/{sensor}")));
        }
        self.commit(&mut t, Mutation::GrantRevoked(g))
    }

    pub fn has_grant(&self, consumer: ConsumerId, sensor: SensorId) -> bool {
        self.read().grants.contains(&Grant { consumer_id: consumer, sensor_id: sensor })
    }
}
