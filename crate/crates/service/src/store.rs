//! File store: per-session move logs and snapshots, and a verdict cache.
//!
//! Layout under the store root:
//!
//! ```text
//! sessions/<id>/meta.json       how the session was created
//! sessions/<id>/log.jsonl       one line per move
//! sessions/<id>/snapshot.json   the record after the last move
//! verdicts/<key>.json           cached solver results
//! ```

use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use protogame::game::Move;
use protogame::validity::{SearchLimits, Verdict};
use protogame::Formula;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::session::{Session, SessionError, SessionMeta, SessionRecord};

/// Environment variable naming the default store directory.
pub const STORE_ENV: &str = "PROTOGAME_STORE";

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("store i/o on {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("corrupt store entry {path}: {message}")]
    Corrupt { path: String, message: String },
    #[error("cannot restore session {id}: {source}")]
    Replay { id: String, source: SessionError },
}

fn io(path: &Path) -> impl FnOnce(std::io::Error) -> StoreError + '_ {
    move |source| StoreError::Io { path: path.display().to_string(), source }
}

/// One line of a session log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogEntry {
    /// State version the move was played at.
    pub version: usize,
    #[serde(rename = "move")]
    pub mv: Move,
}

/// A store rooted at a directory.
#[derive(Debug, Clone)]
pub struct Store {
    root: PathBuf,
}

impl Store {
    pub fn open(root: impl Into<PathBuf>) -> Result<Store, StoreError> {
        let root = root.into();
        for sub in ["sessions", "verdicts"] {
            let p = root.join(sub);
            fs::create_dir_all(&p).map_err(io(&p))?;
        }
        Ok(Store { root })
    }

    /// The store named by the environment, if any.
    pub fn from_env() -> Result<Option<Store>, StoreError> {
        match std::env::var_os(STORE_ENV) {
            Some(dir) if !dir.is_empty() => Store::open(PathBuf::from(dir)).map(Some),
            _ => Ok(None),
        }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn session_dir(&self, id: &str) -> PathBuf {
        self.root.join("sessions").join(id)
    }

    /// Writes the metadata of a new session and an empty log.
    pub fn create(&self, record: &SessionRecord) -> Result<(), StoreError> {
        let dir = self.session_dir(&record.meta.id);
        fs::create_dir_all(&dir).map_err(io(&dir))?;
        write_atomic(&dir.join("meta.json"), &serde_json::to_vec_pretty(&record.meta).expect("meta serializes"))?;
        let log = dir.join("log.jsonl");
        File::create(&log).map_err(io(&log))?;
        self.snapshot(record)
    }

    /// Appends a move to the log and refreshes the snapshot.
    pub fn record_move(&self, record: &SessionRecord, entry: &LogEntry) -> Result<(), StoreError> {
        let log = self.session_dir(&record.meta.id).join("log.jsonl");
        let mut f = OpenOptions::new().append(true).open(&log).map_err(io(&log))?;
        let mut line = serde_json::to_vec(entry).expect("log entries serialize");
        line.push(b'\n');
        f.write_all(&line).map_err(io(&log))?;
        f.sync_data().map_err(io(&log))?;
        self.snapshot(record)
    }

    pub fn snapshot(&self, record: &SessionRecord) -> Result<(), StoreError> {
        let path = self.session_dir(&record.meta.id).join("snapshot.json");
        write_atomic(&path, &serde_json::to_vec(record).expect("records serialize"))
    }

    /// Moves of a session log. A torn last line, left by a crash during an
    /// append, is ignored; damage anywhere else is an error.
    pub fn read_log(&self, id: &str) -> Result<Vec<LogEntry>, StoreError> {
        Ok(self.scan_log(id)?.0)
    }

    /// Entries and whether the last line is torn.
    fn scan_log(&self, id: &str) -> Result<(Vec<LogEntry>, bool), StoreError> {
        let path = self.session_dir(id).join("log.jsonl");
        let f = File::open(&path).map_err(io(&path))?;
        let lines: Vec<String> = BufReader::new(f).lines().collect::<Result<_, _>>().map_err(io(&path))?;
        let mut out = Vec::new();
        for (k, line) in lines.iter().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            match serde_json::from_str::<LogEntry>(line) {
                Ok(e) => out.push(e),
                Err(_) if k + 1 == lines.len() => return Ok((out, true)),
                Err(e) => {
                    return Err(StoreError::Corrupt {
                        path: path.display().to_string(),
                        message: format!("line {}: {e}", k + 1),
                    })
                }
            }
        }
        Ok((out, false))
    }

    pub fn read_snapshot(&self, id: &str) -> Result<Option<SessionRecord>, StoreError> {
        let path = self.session_dir(id).join("snapshot.json");
        match fs::read(&path) {
            Ok(bytes) => Ok(serde_json::from_slice(&bytes).ok()),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(io(&path)(e)),
        }
    }

    /// Rebuilds one session from its metadata and log.
    pub fn load(&self, id: &str) -> Result<Session, StoreError> {
        let path = self.session_dir(id).join("meta.json");
        let bytes = fs::read(&path).map_err(io(&path))?;
        let meta: SessionMeta = serde_json::from_slice(&bytes)
            .map_err(|e| StoreError::Corrupt { path: path.display().to_string(), message: e.to_string() })?;
        let (entries, torn) = self.scan_log(id)?;
        if torn {
            // later appends must not land after the fragment
            let mut bytes = Vec::new();
            for e in &entries {
                bytes.extend(serde_json::to_vec(e).expect("log entries serialize"));
                bytes.push(b'\n');
            }
            write_atomic(&self.session_dir(id).join("log.jsonl"), &bytes)?;
        }
        let moves: Vec<Move> = entries.into_iter().map(|e| e.mv).collect();
        let mut session =
            Session::restore(meta, &moves).map_err(|source| StoreError::Replay { id: id.to_string(), source })?;
        let snap = self.read_snapshot(id)?;
        if let Some(s) = snap.as_ref().filter(|s| s.transcript == session.record.transcript) {
            session.record.updated = s.updated;
        }
        if snap.as_ref() != Some(&session.record) {
            self.snapshot(&session.record)?;
        }
        Ok(session)
    }

    /// Ids of every stored session.
    pub fn session_ids(&self) -> Result<Vec<String>, StoreError> {
        let dir = self.root.join("sessions");
        let mut ids = Vec::new();
        for e in fs::read_dir(&dir).map_err(io(&dir))? {
            let e = e.map_err(io(&dir))?;
            if e.path().join("meta.json").exists() {
                ids.push(e.file_name().to_string_lossy().into_owned());
            }
        }
        ids.sort();
        Ok(ids)
    }

    /// Every stored session, replayed.
    pub fn load_all(&self) -> Result<Vec<Session>, StoreError> {
        self.session_ids()?.iter().map(|id| self.load(id)).collect()
    }

    pub fn cached_verdict(&self, f: &Formula, lim: &SearchLimits) -> Option<Verdict> {
        let bytes = fs::read(self.verdict_path(f, lim)).ok()?;
        serde_json::from_slice(&bytes).ok()
    }

    pub fn cache_verdict(&self, f: &Formula, lim: &SearchLimits, v: &Verdict) -> Result<(), StoreError> {
        write_atomic(&self.verdict_path(f, lim), &serde_json::to_vec(v).expect("verdicts serialize"))
    }

    fn verdict_path(&self, f: &Formula, lim: &SearchLimits) -> PathBuf {
        self.root.join("verdicts").join(format!("{}.json", verdict_key(f, lim)))
    }
}

/// Cache key: the canonical (nameless) formula and the limits.
pub fn verdict_key(f: &Formula, lim: &SearchLimits) -> String {
    let mut h = Sha256::new();
    h.update(serde_json::to_vec(&f.canonical()).expect("formulas serialize"));
    h.update(serde_json::to_vec(lim).expect("limits serialize"));
    hex::encode(h.finalize())
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), StoreError> {
    let tmp = path.with_extension("tmp");
    {
        let mut f = File::create(&tmp).map_err(io(&tmp))?;
        f.write_all(bytes).map_err(io(&tmp))?;
        f.sync_data().map_err(io(&tmp))?;
    }
    fs::rename(&tmp, path).map_err(io(path))
}
