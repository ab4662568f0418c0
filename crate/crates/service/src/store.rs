//! Append-only file store. Every object is one JSON file named by its id,
//! written to a temporary name and renamed into place, so readers never see
//! a partial file and an id, once written, never changes.

use std::io::Write;
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use dosewise_core::trace::ActivityRecord;
use serde::{Deserialize, Serialize};
use uuid::Uuid;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoredTrace {
    pub trace_id: String,
    pub owner: String,
    pub created_at: DateTime<Utc>,
    pub records: Vec<ActivityRecord<f64>>,
}

#[derive(Debug, Clone)]
pub struct Store {
    root: PathBuf,
}

/// Ids are UUIDs; anything else cannot name a stored object.
pub fn parse_id(id: &str) -> Option<Uuid> {
    Uuid::parse_str(id).ok()
}

impl Store {
    pub fn open(root: &Path) -> std::io::Result<Self> {
        for sub in ["traces", "jobs"] {
            std::fs::create_dir_all(root.join(sub))?;
        }
        Ok(Self { root: root.to_path_buf() })
    }

    fn path(&self, kind: &str, id: Uuid) -> PathBuf {
        self.root.join(kind).join(format!("{id}.json"))
    }

    fn write_new(&self, kind: &str, id: Uuid, bytes: &[u8]) -> std::io::Result<()> {
        let dir = self.root.join(kind);
        let tmp = dir.join(format!(".{id}.tmp"));
        {
            let mut f = std::fs::File::create(&tmp)?;
            f.write_all(bytes)?;
            f.sync_all()?;
        }
        let dest = self.path(kind, id);
        if dest.exists() {
            std::fs::remove_file(&tmp)?;
            return Err(std::io::Error::new(std::io::ErrorKind::AlreadyExists, format!("{kind}/{id} already stored")));
        }
        std::fs::rename(&tmp, dest)
    }

    fn read(&self, kind: &str, id: &str) -> std::io::Result<Option<Vec<u8>>> {
        let Some(id) = parse_id(id) else { return Ok(None) };
        match std::fs::read(self.path(kind, id)) {
            Ok(bytes) => Ok(Some(bytes)),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(e),
        }
    }

    /// Stores a new trace under a fresh id (identical uploads get distinct ids).
    pub fn put_trace(&self, owner: &str, records: Vec<ActivityRecord<f64>>) -> std::io::Result<StoredTrace> {
        let id = Uuid::new_v4();
        let stored = StoredTrace { trace_id: id.to_string(), owner: owner.into(), created_at: Utc::now(), records };
        self.write_new("traces", id, &serde_json::to_vec_pretty(&stored).expect("trace serializes"))?;
        Ok(stored)
    }

    /// Raw stored bytes, served unchanged.
    pub fn trace_bytes(&self, id: &str) -> std::io::Result<Option<Vec<u8>>> {
        self.read("traces", id)
    }

    pub fn get_trace(&self, id: &str) -> std::io::Result<Option<StoredTrace>> {
        match self.trace_bytes(id)? {
            Some(bytes) => serde_json::from_slice(&bytes)
                .map(Some)
                .map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e)),
            None => Ok(None),
        }
    }

    pub fn put_job(&self, id: Uuid, bytes: &[u8]) -> std::io::Result<()> {
        self.write_new("jobs", id, bytes)
    }

    pub fn job_bytes(&self, id: &str) -> std::io::Result<Option<Vec<u8>>> {
        self.read("jobs", id)
    }
}
