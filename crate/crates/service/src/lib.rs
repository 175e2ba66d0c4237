//! HTTP and WebSocket service exposing modeling sessions.
//!
//! Each session owns a [`Project`]. At most one computation runs per
//! session; mutating requests that arrive meanwhile get `409`.

mod error;
mod handlers;

use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::{Arc, Mutex, MutexGuard};

use axum::routing::{get, post, put};
use axum::Router;
use serde::Serialize;
use tokio::sync::broadcast;

use sketchface::idgmm::ProviderBundle;
use sketchface::session::Project;
use sketchface::suggest::SuggestionIndex;

pub use error::{parse_json, ApiError};

/// Most suggestions one request returns.
pub const MAX_SUGGESTIONS: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Idle,
    CoarseRunning,
    RefineRunning,
    PreviewRunning,
}

impl Status {
    pub fn as_str(self) -> &'static str {
        match self {
            Status::Idle => "idle",
            Status::CoarseRunning => "coarse-running",
            Status::RefineRunning => "refine-running",
            Status::PreviewRunning => "preview-running",
        }
    }
}

/// Messages pushed on `/sessions/{id}/events`.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ServerEvent {
    Status {
        status: Status,
    },
    PreviewReady {
        strokes: usize,
        bytes: usize,
    },
    MeshReady {
        stage: &'static str,
        vertices: usize,
        triangles: usize,
        ms: f64,
    },
    Failed {
        message: String,
    },
}

pub struct Session {
    project: Mutex<Project>,
    status: Mutex<Status>,
    events: broadcast::Sender<ServerEvent>,
}

fn lock<T>(m: &Mutex<T>) -> MutexGuard<'_, T> {
    m.lock().unwrap_or_else(|e| e.into_inner())
}

impl Session {
    fn new() -> Self {
        Self {
            project: Mutex::new(Project::default()),
            status: Mutex::new(Status::Idle),
            events: broadcast::channel(64).0,
        }
    }

    pub fn status(&self) -> Status {
        *lock(&self.status)
    }

    /// Copy of the project as of now.
    pub fn snapshot(&self) -> Project {
        lock(&self.project).clone()
    }

    fn commit(&self, project: Project) {
        *lock(&self.project) = project;
    }

    fn emit(&self, e: ServerEvent) {
        // No subscribers is fine.
        let _ = self.events.send(e);
    }

    pub fn subscribe(&self) -> broadcast::Receiver<ServerEvent> {
        self.events.subscribe()
    }

    /// Claims the session for one computation.
    fn begin(self: &Arc<Self>, status: Status) -> Result<Busy, ApiError> {
        {
            let mut s = lock(&self.status);
            if *s != Status::Idle {
                return Err(ApiError::busy(s.as_str()));
            }
            *s = status;
        }
        self.emit(ServerEvent::Status { status });
        Ok(Busy(self.clone()))
    }

    /// Fails with 409 while a computation runs.
    fn ensure_idle(&self) -> Result<(), ApiError> {
        match self.status() {
            Status::Idle => Ok(()),
            s => Err(ApiError::busy(s.as_str())),
        }
    }
}

/// Returns the session to idle when dropped.
struct Busy(Arc<Session>);

impl Drop for Busy {
    fn drop(&mut self) {
        *lock(&self.0.status) = Status::Idle;
        self.0.emit(ServerEvent::Status { status: Status::Idle });
    }
}

pub struct ServiceConfig {
    pub providers: ProviderBundle,
    pub corpus: SuggestionIndex,
    /// Refinement intermediates go to `<debug_dir>/<session id>/`.
    pub debug_dir: Option<PathBuf>,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            providers: ProviderBundle::procedural(),
            corpus: SuggestionIndex::builtin(),
            debug_dir: None,
        }
    }
}

#[derive(Clone)]
pub struct AppState {
    sessions: Arc<Mutex<HashMap<String, Arc<Session>>>>,
    config: Arc<ServiceConfig>,
}

impl AppState {
    pub fn new(config: ServiceConfig) -> Self {
        Self {
            sessions: Arc::default(),
            config: Arc::new(config),
        }
    }

    pub fn session(&self, id: &str) -> Result<Arc<Session>, ApiError> {
        lock(&self.sessions)
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::unknown_session(id))
    }

    fn create(&self) -> String {
        let id = uuid::Uuid::new_v4().simple().to_string();
        lock(&self.sessions).insert(id.clone(), Arc::new(Session::new()));
        id
    }

    fn remove(&self, id: &str) -> bool {
        lock(&self.sessions).remove(id).is_some()
    }
}

pub fn router(state: AppState) -> Router {
    use handlers::*;
    Router::new()
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(session_info).delete(delete_session))
        .route("/sessions/{id}/coarse-sketch", put(put_coarse_sketch))
        .route("/sessions/{id}/layout", put(put_layout))
        .route("/sessions/{id}/profile", put(put_profile))
        .route("/sessions/{id}/strokes", post(post_strokes))
        .route("/sessions/{id}/refine", post(post_refine))
        .route("/sessions/{id}/suggest", post(post_suggest))
        .route("/sessions/{id}/mesh", get(get_mesh))
        .route("/sessions/{id}/project", get(get_project).put(put_project))
        .route("/sessions/{id}/events", get(events))
        .with_state(state)
}
