//! Per-sensor append-only topics drained by sink connectors into per-sensor
//! indexes, plus the offset-ordered query path.
//!
//! ```text
//! gateway --publish--> TopicLog --drain (SinkConnector)--> SensorIndex --query--> consumer
//! ```

mod validate;

pub use validate::validate_payload;

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::{Arc, Mutex, RwLock};
use std::thread::JoinHandle;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::clock::{Clock, Micros};
use crate::error::{Error, Result};
use crate::model::{PayloadSchema, SensorId};

pub const DEFAULT_BATCH_SIZE: usize = 500;
pub const DEFAULT_QUERY_LIMIT: usize = 100;
pub const DEFAULT_DRAIN_INTERVAL: Micros = Micros::from_ms(100);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorReading {
    pub sensor_id: SensorId,
    /// Milliseconds since the Unix epoch.
    pub timestamp: u64,
    pub payload: Value,
}

#[derive(Debug)]
struct Connector {
    cursor: u64,
}

#[derive(Debug)]
struct Stream {
    schema: PayloadSchema,
    topic: RwLock<Vec<SensorReading>>,
    index: RwLock<Vec<SensorReading>>,
    connector: Mutex<Connector>,
}

/// Point-in-time view of one stream's registrations and positions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StreamStats {
    pub next_offset: u64,
    pub documents: u64,
    /// Last sunk offset, `None` while the index is empty.
    pub high_watermark: Option<u64>,
    pub cursor: u64,
    pub batch_size: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct PipelineSettings {
    pub batch_size: usize,
    pub drain_interval: Micros,
    pub query_limit: usize,
}

impl Default for PipelineSettings {
    fn default() -> Self {
        Self {
            batch_size: DEFAULT_BATCH_SIZE,
            drain_interval: DEFAULT_DRAIN_INTERVAL,
            query_limit: DEFAULT_QUERY_LIMIT,
        }
    }
}

#[derive(Debug)]
pub struct Pipeline {
    streams: RwLock<BTreeMap<SensorId, Arc<Stream>>>,
    settings: PipelineSettings,
    /// Index of the last drain tick run by [`Pipeline::pump_due`].
    last_tick: AtomicU64,
}

impl Default for Pipeline {
    fn default() -> Self {
        Self::new(PipelineSettings::default())
    }
}

impl Pipeline {
    pub fn new(settings: PipelineSettings) -> Self {
        assert!(settings.batch_size > 0, "batch_size must be positive");
        assert!(settings.drain_interval.0 > 0, "drain interval must be positive");
        Self { streams: RwLock::new(BTreeMap::new()), settings, last_tick: AtomicU64::new(0) }
    }

    pub fn settings(&self) -> PipelineSettings {
        self.settings
    }

    fn stream(&self, id: SensorId) -> Result<Arc<Stream>> {
        self.streams
            .read()
            .unwrap_or_else(|p| p.into_inner())
            .get(&id)
            .cloned()
            .ok_or_else(|| Error::not_found("stream", id.0))
    }

    /// Registers topic, index and connector for `id` in one step.
    pub fn provision_stream(&self, id: SensorId, schema: &PayloadSchema) -> Result<()> {
        let mut streams = self.streams.write().unwrap_or_else(|p| p.into_inner());
        if streams.contains_key(&id) {
            return Err(Error::Conflict(format!("stream {id} already provisioned")));
        }
        streams.insert(
            id,
            Arc::new(Stream {
                schema: schema.clone(),
                topic: RwLock::new(Vec::new()),
                index: RwLock::new(Vec::new()),
                connector: Mutex::new(Connector { cursor: 0 }),
            }),
        );
        Ok(())
    }

    pub fn deprovision_stream(&self, id: SensorId) -> Result<()> {
        self.streams
            .write()
            .unwrap_or_else(|p| p.into_inner())
            .remove(&id)
            .map(|_| ())
            .ok_or_else(|| Error::not_found("stream", id.0))
    }

    pub fn is_provisioned(&self, id: SensorId) -> bool {
        self.stream(id).is_ok()
    }

    pub fn stream_ids(&self) -> Vec<SensorId> {
        self.streams.read().unwrap_or_else(|p| p.into_inner()).keys().copied().collect()
    }

    pub fn schema(&self, id: SensorId) -> Result<PayloadSchema> {
        Ok(self.stream(id)?.schema.clone())
    }

    pub fn stats(&self, id: SensorId) -> Result<StreamStats> {
        let s = self.stream(id)?;
        let cursor = s.connector.lock().unwrap_or_else(|p| p.into_inner()).cursor;
        let next_offset = s.topic.read().unwrap_or_else(|p| p.into_inner()).len() as u64;
        let documents = s.index.read().unwrap_or_else(|p| p.into_inner()).len() as u64;
        Ok(StreamStats {
            next_offset,
            documents,
            high_watermark: documents.checked_sub(1),
            cursor,
            batch_size: self.settings.batch_size,
        })
    }

    /// Appends a reading to the sensor's topic and returns its offset.
    /// The payload is expected to have been validated already.
    pub fn publish(&self, id: SensorId, reading: SensorReading) -> Result<u64> {
        let s = self.stream(id)?;
        let mut topic = s.topic.write().unwrap_or_else(|p| p.into_inner());
        topic.push(reading);
        Ok(topic.len() as u64 - 1)
    }

    /// Moves up to `max_batches` batches from topic to index and returns the
    /// number of readings sunk. Each batch becomes visible atomically.
    pub fn drain(&self, id: SensorId, max_batches: usize) -> Result<usize> {
        let s = self.stream(id)?;
        let mut connector = s.connector.lock().unwrap_or_else(|p| p.into_inner());
        let mut sunk = 0;
        for _ in 0..max_batches {
            let batch: Vec<SensorReading> = {
                let topic = s.topic.read().unwrap_or_else(|p| p.into_inner());
                let start = connector.cursor as usize;
                let end = (start + self.settings.batch_size).min(topic.len());
                topic[start..end].to_vec()
            };
            if batch.is_empty() {
                break;
            }
            let n = batch.len();
            s.index.write().unwrap_or_else(|p| p.into_inner()).extend(batch);
            connector.cursor += n as u64;
            sunk += n;
        }
        Ok(sunk)
    }

    /// Drains every stream until caught up.
    pub fn drain_all(&self) -> usize {
        self.stream_ids().into_iter().map(|id| self.drain(id, usize::MAX).unwrap_or(0)).sum()
    }

    /// Runs the connectors if a drain tick boundary (multiple of the drain
    /// interval) has passed since the last call. A reading published at `t`
    /// is therefore queryable once any call with `now >= t + interval` returns.
    pub fn pump_due(&self, now: Micros) -> usize {
        let tick = now.0 / self.settings.drain_interval.0;
        let prev = self.last_tick.fetch_max(tick, Ordering::AcqRel);
        if tick > prev {
            self.drain_all()
        } else {
            0
        }
    }

    /// Sunk readings, newest first, at most `limit` (default from settings).
    pub fn query(&self, id: SensorId, limit: Option<usize>) -> Result<Vec<SensorReading>> {
        let s = self.stream(id)?;
        let limit = limit.unwrap_or(self.settings.query_limit);
        let index = s.index.read().unwrap_or_else(|p| p.into_inner());
        Ok(index.iter().rev().take(limit).cloned().collect())
    }

    pub fn topic_records(&self, id: SensorId) -> Result<Vec<SensorReading>> {
        Ok(self.stream(id)?.topic.read().unwrap_or_else(|p| p.into_inner()).clone())
    }

    pub fn index_documents(&self, id: SensorId) -> Result<Vec<SensorReading>> {
        Ok(self.stream(id)?.index.read().unwrap_or_else(|p| p.into_inner()).clone())
    }

    /// Writes each topic as line-delimited JSON to `dir/<sensor_id>.log`.
    pub fn dump_topics(&self, dir: impl AsRef<Path>) -> std::io::Result<usize> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir)?;
        let ids = self.stream_ids();
        for id in &ids {
            let records = self.topic_records(*id).unwrap_or_default();
            let mut out = BufWriter::new(fs::File::create(dir.join(format!("{id}.log")))?);
            for r in records {
                serde_json::to_writer(&mut out, &r)?;
                out.write_all(b"\n")?;
            }
            out.flush()?;
        }
        Ok(ids.len())
    }

    /// Runs [`Pipeline::pump_due`] on a background thread every drain interval
    /// until the returned guard is dropped.
    pub fn spawn_pump(self: &Arc<Self>, clock: Arc<dyn Clock>) -> PumpGuard {
        let stop = Arc::new(AtomicBool::new(false));
        let pipeline = Arc::clone(self);
        let flag = Arc::clone(&stop);
        let period = Duration::from_micros(self.settings.drain_interval.0);
        let handle = std::thread::Builder::new()
            .name("sink-pump".into())
            .spawn(move || {
                while !flag.load(Ordering::Acquire) {
                    pipeline.pump_due(clock.now());
                    std::thread::sleep(period);
                }
            })
            .expect("spawn pump thread");
        PumpGuard { stop, handle: Some(handle) }
    }
}

pub struct PumpGuard {
    stop: Arc<AtomicBool>,
    handle: Option<JoinHandle<()>>,
}

impl Drop for PumpGuard {
    fn drop(&mut self) {
        self.stop.store(true, Ordering::Release);
        if let Some(h) = self.handle.take() {
            let _ = h.join();
        }
    }
}
