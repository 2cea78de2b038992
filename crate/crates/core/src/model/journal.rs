use std::fs::{File, OpenOptions};
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::{Consumer, ConsumerId, Device, DeviceId, Grant, Sensor, SensorId, User, UserId};

/// One state change, as written to the durable log (one JSON object per line).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum Mutation {
    UserCreated(User),
    DeviceCreated(Device),
    SensorCreated(Sensor),
    ConsumerCreated(Consumer),
    GrantAdded(Grant),
    GrantRevoked(Grant),
    UserDeleted { id: UserId },
    DeviceDeleted { id: DeviceId },
    SensorDeleted { id: SensorId },
    ConsumerDeleted { id: ConsumerId },
    DeviceRenamed { id: DeviceId, name: String },
    SensorRenamed { id: SensorId, name: String },
    ConsumerRenamed { id: ConsumerId, name: String },
}

pub trait Journal: Send + Sync {
    fn append(&self, mutation: &Mutation) -> io::Result<()>;
}

#[derive(Debug, Default)]
pub struct MemoryJournal;

impl Journal for MemoryJournal {
    fn append(&self, _: &Mutation) -> io::Result<()> {
        Ok(())
    }
}

/// Append-only line-delimited JSON log.
#[derive(Debug)]
pub struct FileJournal {
    path: PathBuf,
    out: Mutex<BufWriter<File>>,
}

impl FileJournal {
    /// Opens (creating if needed) the log at `path` and returns it together
    /// with the mutations already recorded there.
    pub fn open(path: impl AsRef<Path>) -> io::Result<(Self, Vec<Mutation>)> {
        let path = path.as_ref().to_path_buf();
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir)?;
        }
        let existing = match File::open(&path) {
            Ok(f) => read_log(BufReader::new(f))?,
            Err(e) if e.kind() == io::ErrorKind::NotFound => Vec::new(),
            Err(e) => return Err(e),
        };
        let file = OpenOptions::new().create(true).append(true).open(&path)?;
        Ok((Self { path, out: Mutex::new(BufWriter::new(file)) }, existing))
    }

    pub fn path(&self) -> &Path {
        &self.path
    }
}

fn read_log(reader: impl BufRead) -> io::Result<Vec<Mutation>> {
    let mut out = Vec::new();
    for (n, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let m = serde_json::from_str(&line)
            .map_err(|e| io::Error::new(io::ErrorKind::InvalidData, format!("line {}: {e}", n + 1)))?;
        out.push(m);
    }
    Ok(out)
}

impl Journal for FileJournal {
    fn append(&self, mutation: &Mutation) -> io::Result<()> {
        let mut line = serde_json::to_vec(mutation)?;
        line.push(b'\n');
        let mut out = self.out.lock().unwrap_or_else(|p| p.into_inner());
        out.write_all(&line)?;
        out.flush()
    }
}
