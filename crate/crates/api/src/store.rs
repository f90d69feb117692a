//! In-memory session registry backed by per-session JSON-lines event logs.
//!
//! Each session lives in `<dir>/<session_id>.jsonl` with its write token in
//! `<dir>/<session_id>.token`. Readers take an `Arc` snapshot and never
//! block writers; writes to one session are serialized by its own mutex.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use chrono::{DateTime, Utc};
use parking_lot::{Mutex, RwLock};
use ruhs_core::annotate::{append_event, read_events, AnnotationSession, SessionError, SessionEvent, SubmitOutcome};
use ruhs_core::LabelPath;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("{path}: {source}")]
    Log {
        path: PathBuf,
        #[source]
        source: ruhs_core::annotate::EventLogError,
    },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: log belongs to session {found:?}")]
    WrongSession { path: PathBuf, found: String },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Comment {
    pub id: String,
    pub text: String,
}

pub(crate) struct Slot {
    pub token: String,
    snapshot: RwLock<Arc<AnnotationSession>>,
    writer: Mutex<()>,
}

impl Slot {
    fn new(token: String, session: AnnotationSession) -> Self {
        Slot {
            token,
            snapshot: RwLock::new(Arc::new(session)),
            writer: Mutex::new(()),
        }
    }

    pub fn snapshot(&self) -> Arc<AnnotationSession> {
        self.snapshot.read().clone()
    }
}

pub(crate) enum SubmitError {
    Session(SessionError),
    AlreadyLabeled,
    Storage(String),
}

pub(crate) struct Store {
    comments: BTreeMap<String, String>,
    order: Vec<String>,
    dir: Option<PathBuf>,
    sessions: RwLock<BTreeMap<String, Arc<Slot>>>,
}

fn new_token() -> String {
    uuid::Uuid::new_v4().simple().to_string()
}

impl Store {
    /// Builds the registry, replaying every session log found in `dir`.
    pub fn open(comments: Vec<Comment>, dir: Option<PathBuf>) -> Result<Self, StoreError> {
        let order = comments.iter().map(|c| c.id.clone()).collect();
        let comments = comments.into_iter().map(|c| (c.id, c.text)).collect();
        let mut sessions = BTreeMap::new();
        if let Some(dir) = &dir {
            fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
            let mut logs: Vec<PathBuf> = fs::read_dir(dir)
                .map_err(|e| io_err(dir, e))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.extension().is_some_and(|x| x == "jsonl"))
                .collect();
            logs.sort();
            for path in logs {
                let events = read_events(&path).map_err(|e| StoreError::Log {
                    path: path.clone(),
                    source: e,
                })?;
                let session = AnnotationSession::replay(&events).map_err(|e| StoreError::Log {
                    path: path.clone(),
                    source: e,
                })?;
                if path.file_stem().and_then(|s| s.to_str()) != Some(session.session_id.as_str()) {
                    return Err(StoreError::WrongSession {
                        path,
                        found: session.session_id,
                    });
                }
                let token_path = path.with_extension("token");
                let token = match fs::read_to_string(&token_path) {
                    Ok(t) => t.trim().to_string(),
                    Err(_) => {
                        let t = new_token();
                        fs::write(&token_path, &t).map_err(|e| io_err(&token_path, e))?;
                        t
                    }
                };
                log::info!("replayed session {} ({} decisions)", session.session_id, session.decisions.len());
                sessions.insert(session.session_id.clone(), Arc::new(Slot::new(token, session)));
            }
        }
        Ok(Store {
            comments,
            order,
            dir,
            sessions: RwLock::new(sessions),
        })
    }

    pub fn comment_text(&self, id: &str) -> Option<&str> {
        self.comments.get(id).map(String::as_str)
    }

    pub fn has_comment(&self, id: &str) -> bool {
        self.comments.contains_key(id)
    }

    pub fn all_comment_ids(&self) -> Vec<String> {
        self.order.clone()
    }

    pub fn get(&self, id: &str) -> Option<Arc<Slot>> {
        self.sessions.read().get(id).cloned()
    }

    fn log_path(&self, id: &str) -> Option<PathBuf> {
        self.dir.as_ref().map(|d| d.join(format!("{id}.jsonl")))
    }

    /// Registers a new session; `None` when the id is taken.
    pub fn create(
        &self,
        session_id: String,
        annotator: String,
        queue: Vec<String>,
        at: DateTime<Utc>,
    ) -> Result<Option<(Arc<Slot>, String)>, String> {
        let mut sessions = self.sessions.write();
        if sessions.contains_key(&session_id) {
            return Ok(None);
        }
        let token = new_token();
        if let Some(path) = self.log_path(&session_id) {
            let event = SessionEvent::Created {
                session_id: session_id.clone(),
                annotator: annotator.clone(),
                queue: queue.clone(),
                at,
            };
            append_event(&path, &event).map_err(|e| e.to_string())?;
            fs::write(path.with_extension("token"), &token).map_err(|e| e.to_string())?;
        }
        let slot = Arc::new(Slot::new(token.clone(), AnnotationSession::new(session_id.clone(), annotator, queue)));
        sessions.insert(session_id, slot.clone());
        Ok(Some((slot, token)))
    }

    /// Applies one decision: validate against a private copy, persist the
    /// event, then publish the new snapshot.
    pub fn submit(
        &self,
        slot: &Slot,
        comment_id: &str,
        path: LabelPath,
        amend: bool,
        at: DateTime<Utc>,
    ) -> Result<(SubmitOutcome, Arc<AnnotationSession>), SubmitError> {
        let _guard = slot.writer.lock();
        let current = slot.snapshot();
        if current.is_decided(comment_id) && !amend {
            return Err(SubmitError::AlreadyLabeled);
        }
        let mut next = (*current).clone();
        let outcome = next.submit(comment_id, path.clone(), at).map_err(SubmitError::Session)?;
        if let Some(log) = self.log_path(&next.session_id) {
            let event = SessionEvent::Submitted {
                comment_id: comment_id.to_string(),
                annotator: next.annotator.clone(),
                path,
                at,
            };
            append_event(&log, &event).map_err(|e| SubmitError::Storage(e.to_string()))?;
        }
        let next = Arc::new(next);
        *slot.snapshot.write() = next.clone();
        Ok((outcome, next))
    }
}

fn io_err(path: &Path, source: std::io::Error) -> StoreError {
    StoreError::Io {
        path: path.to_path_buf(),
        source,
    }
}
