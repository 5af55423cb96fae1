//! HTTP front end for a blind annotation session.
//!
//! One process hosts one [`Session`]. Each role (owner A, owner B, coordinator
//! C) gets its own bearer token, and every endpoint checks the role before it
//! touches the session: owners only ever see their own records, the
//! coordinator never sees record content. The session document is rewritten
//! atomically after every mutation.

mod api;
mod auth;

use std::path::PathBuf;
use std::sync::{Arc, Mutex};

use blindanno::protocol::{ProtocolError, Session};
use blindanno::Party;
use serde::{Deserialize, Serialize};

pub use api::{
    router, AdvanceSummary, AnnotationAccepted, AnnotationRequest, AnnotationTask, AutoAnnotation, DslManifest,
    brief, ErrorBody, ProgressView, TaskStatus, BRIEF_LIMIT,
};
pub use auth::Tokens;

/// Shared state behind the router. All session access goes through one mutex,
/// so mutations are serialized and reads see a consistent snapshot.
#[derive(Clone)]
pub struct AppState {
    inner: Arc<Mutex<Inner>>,
    tokens: Arc<Tokens>,
    names: Arc<[String; 2]>,
}

struct Inner {
    session: Session,
    path: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ServiceOptions {
    /// Display names of the two datasets, shown with each task.
    pub dataset_names: [String; 2],
    /// Where to persist the session after each mutation; `None` keeps it in memory.
    pub path: Option<PathBuf>,
}

impl Default for ServiceOptions {
    fn default() -> Self {
        ServiceOptions {
            dataset_names: ["dataset_a".into(), "dataset_b".into()],
            path: None,
        }
    }
}

impl AppState {
    pub fn new(session: Session, tokens: Tokens, options: ServiceOptions) -> Self {
        AppState {
            inner: Arc::new(Mutex::new(Inner {
                session,
                path: options.path,
            })),
            tokens: Arc::new(tokens),
            names: Arc::new(options.dataset_names),
        }
    }

    pub fn tokens(&self) -> &Tokens {
        &self.tokens
    }

    /// Runs `f` against the session without persisting anything.
    pub fn read<T>(&self, f: impl FnOnce(&Session) -> T) -> T {
        let guard = self.inner.lock().unwrap_or_else(|e| e.into_inner());
        f(&guard.session)
    }

    /// Runs a mutation and saves the session if it succeeded.
    pub(crate) fn write<T>(&self, f: impl FnOnce(&mut Session) -> Result<T, ProtocolError>) -> Result<T, ProtocolError> {
        let mut guard = self.inner.lock().unwrap_or_else(|e| e.into_inner());
        let out = f(&mut guard.session)?;
        if let Some(path) = &guard.path {
            guard.session.save(path)?;
        }
        Ok(out)
    }

    pub(crate) fn dataset_name(&self, party: Party) -> &str {
        match party {
            Party::B => &self.names[1],
            _ => &self.names[0],
        }
    }
}
