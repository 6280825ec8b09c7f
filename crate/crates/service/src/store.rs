//! Sessions in memory, each backed by an append-only JSON-lines log.

use std::collections::HashMap;
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use parking_lot::{Mutex, RwLock};

use crate::error::ApiError;
use crate::session::{CohortInput, Event, Session, Step, TrialConfig};

struct Slot {
    /// Held for the whole of a write so each session has one writer.
    writer: Mutex<()>,
    snapshot: RwLock<Arc<Session>>,
}

pub struct Store {
    dir: PathBuf,
    sessions: RwLock<HashMap<String, Arc<Slot>>>,
}

#[derive(Debug, thiserror::Error)]
pub enum OpenError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {message}")]
    Replay { path: PathBuf, message: String },
}

fn log_path(dir: &Path, id: &str) -> PathBuf {
    dir.join(format!("{id}.jsonl"))
}

fn append(path: &Path, events: &[Event]) -> Result<(), ApiError> {
    let mut f = OpenOptions::new().create(true).append(true).open(path).map_err(ApiError::internal)?;
    let mut buf = Vec::new();
    for e in events {
        serde_json::to_writer(&mut buf, e).map_err(ApiError::internal)?;
        buf.push(b'\n');
    }
    f.write_all(&buf).and_then(|_| f.sync_data()).map_err(ApiError::internal)
}

/// Reads a session log back into a session.
pub fn replay_file(path: &Path) -> Result<Session, OpenError> {
    let io = |source| OpenError::Io { path: path.to_path_buf(), source };
    let replay = |message: String| OpenError::Replay { path: path.to_path_buf(), message };
    let mut events = Vec::new();
    for (i, line) in BufReader::new(File::open(path).map_err(io)?).lines().enumerate() {
        let line = line.map_err(io)?;
        if line.trim().is_empty() {
            continue;
        }
        events.push(serde_json::from_str(&line).map_err(|e| replay(format!("line {}: {e}", i + 1)))?);
    }
    Session::replay(events).map_err(|e| replay(e.to_string()))
}

impl Store {
    /// Opens `dir`, creating it if needed, and replays every log in it.
    pub fn open(dir: impl Into<PathBuf>) -> Result<Self, OpenError> {
        let dir = dir.into();
        fs::create_dir_all(&dir).map_err(|source| OpenError::Io { path: dir.clone(), source })?;
        let mut sessions = HashMap::new();
        let entries = fs::read_dir(&dir).map_err(|source| OpenError::Io { path: dir.clone(), source })?;
        for entry in entries {
            let path = entry.map_err(|source| OpenError::Io { path: dir.clone(), source })?.path();
            if path.extension().is_some_and(|e| e == "jsonl") {
                let s = replay_file(&path)?;
                sessions.insert(s.id.clone(), Arc::new(Slot::new(s)));
            }
        }
        Ok(Store { dir, sessions: RwLock::new(sessions) })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn create(&self, config: TrialConfig) -> Result<Arc<Session>, ApiError> {
        let id = uuid::Uuid::new_v4().simple().to_string();
        let s = Session::create(id.clone(), config)?;
        append(&log_path(&self.dir, &id), &[s.created_event()])?;
        let slot = Arc::new(Slot::new(s));
        let snap = slot.snapshot.read().clone();
        self.sessions.write().insert(id, slot);
        Ok(snap)
    }

    fn slot(&self, id: &str) -> Result<Arc<Slot>, ApiError> {
        self.sessions.read().get(id).cloned().ok_or_else(|| ApiError::not_found(id))
    }

    pub fn get(&self, id: &str) -> Result<Arc<Session>, ApiError> {
        Ok(self.slot(id)?.snapshot.read().clone())
    }

    /// Applies a cohort: logged first, then published.
    pub fn commit(&self, id: &str, input: CohortInput) -> Result<(Step, Arc<Session>), ApiError> {
        let slot = self.slot(id)?;
        let _writer = slot.writer.lock();
        let mut s = (**slot.snapshot.read()).clone();
        let (step, event) = s.commit(input)?;
        append(&log_path(&self.dir, id), &[event])?;
        let s = Arc::new(s);
        *slot.snapshot.write() = s.clone();
        Ok((step, s))
    }

    pub fn whatif(&self, id: &str, input: CohortInput) -> Result<Step, ApiError> {
        self.get(id)?.preview(input).map(|(step, _)| step)
    }
}

impl Slot {
    fn new(s: Session) -> Self {
        Slot { writer: Mutex::new(()), snapshot: RwLock::new(Arc::new(s)) }
    }
}
