use std::sync::Arc;
use std::time::Instant;

use axum::body::Bytes;
use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde::{Deserialize, Serialize};

use sketchface::coarse::{PartLayout, PartSketch};
use sketchface::geom::TriMesh;
use sketchface::idgmm::RefineDiagnostics;
use sketchface::session::{Event, Project};
use sketchface::strokes::Stroke;
use sketchface::suggest::{Suggestion, SuggestionQuery};

use crate::{lock, parse_json, ApiError, AppState, ServerEvent, Session, Status, MAX_SUGGESTIONS};

type ApiResult<T = Response> = Result<T, ApiError>;

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> ApiResult<T> + Send + 'static) -> ApiResult<T> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::internal(format!("worker panicked: {e}")))?
}

fn ms_since(start: Instant) -> f64 {
    start.elapsed().as_secs_f64() * 1e3
}

#[derive(Debug, Clone, Copy, Default, Deserialize, PartialEq)]
#[serde(rename_all = "snake_case")]
pub enum MeshFormat {
    #[default]
    Summary,
    Obj,
}

#[derive(Debug, Default, Deserialize)]
pub struct FormatQuery {
    #[serde(default)]
    format: MeshFormat,
}

#[derive(Debug, Serialize)]
pub struct MeshSummary {
    pub stage: &'static str,
    pub vertices: usize,
    pub triangles: usize,
    pub boundary_edges: usize,
    pub watertight: bool,
    pub bbox_min: [f64; 3],
    pub bbox_max: [f64; 3],
    pub ms: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub diagnostics: Option<RefineDiagnostics>,
}

fn summary(stage: &'static str, mesh: &TriMesh, ms: f64, diagnostics: Option<RefineDiagnostics>) -> MeshSummary {
    let (lo, hi) = mesh
        .bounding_box()
        .map_or(([0.0; 3], [0.0; 3]), |(a, b)| (a.coords.into(), b.coords.into()));
    MeshSummary {
        stage,
        vertices: mesh.vertices.len(),
        triangles: mesh.triangles.len(),
        boundary_edges: mesh.boundary_edge_count(),
        watertight: mesh.is_watertight(),
        bbox_min: lo,
        bbox_max: hi,
        ms,
        diagnostics,
    }
}

fn obj_response(mesh: &TriMesh) -> ApiResult {
    let text = mesh.to_obj_string()?;
    Ok(([(header::CONTENT_TYPE, "model/obj")], text).into_response())
}

fn mesh_response(format: MeshFormat, s: MeshSummary, mesh: &TriMesh) -> ApiResult {
    match format {
        MeshFormat::Obj => obj_response(mesh),
        MeshFormat::Summary => Ok(Json(s).into_response()),
    }
}

fn require_sketch(p: &Project) -> ApiResult<()> {
    if p.state().sketch.is_none() {
        return Err(ApiError::not_ready("no coarse sketch yet; PUT coarse-sketch first"));
    }
    Ok(())
}

/// Runs `work` on a snapshot under `status` and commits the snapshot only
/// if it succeeds.
async fn compute<T: Send + 'static>(
    session: Arc<Session>,
    status: Status,
    work: impl FnOnce(&mut Project) -> ApiResult<T> + Send + 'static,
) -> ApiResult<T> {
    let busy = session.begin(status)?;
    blocking(move || {
        let _busy = busy;
        let mut p = session.snapshot();
        match work(&mut p) {
            Ok(v) => {
                session.commit(p);
                Ok(v)
            }
            Err(e) => {
                session.emit(ServerEvent::Failed {
                    message: e.message.clone(),
                });
                Err(e)
            }
        }
    })
    .await
}

async fn coarse_event(state: AppState, id: String, format: MeshFormat, event: Event) -> ApiResult {
    let session = state.session(&id)?;
    let s = session.clone();
    let (mesh, ms) = compute(session, Status::CoarseRunning, move |p| {
        let start = Instant::now();
        let needs_sketch = !matches!(event, Event::Sketch { .. });
        p.push(event)?;
        if needs_sketch {
            require_sketch(p)?;
        }
        let mesh = p.coarse_mesh()?.clone();
        let ms = ms_since(start);
        s.emit(ServerEvent::MeshReady {
            stage: "coarse",
            vertices: mesh.vertices.len(),
            triangles: mesh.triangles.len(),
            ms,
        });
        Ok((mesh, ms))
    })
    .await?;
    mesh_response(format, summary("coarse", &mesh, ms, None), &mesh)
}

#[derive(Serialize)]
pub struct Created {
    id: String,
}

pub async fn create_session(State(state): State<AppState>) -> impl IntoResponse {
    (StatusCode::CREATED, Json(Created { id: state.create() }))
}

#[derive(Serialize)]
pub struct SessionInfo {
    id: String,
    status: Status,
    events: usize,
}

pub async fn session_info(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<SessionInfo>> {
    let s = state.session(&id)?;
    Ok(Json(SessionInfo {
        status: s.status(),
        events: s.snapshot().events.len(),
        id,
    }))
}

pub async fn delete_session(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<StatusCode> {
    state.session(&id)?.ensure_idle()?;
    state.remove(&id);
    Ok(StatusCode::NO_CONTENT)
}

pub async fn put_coarse_sketch(
    State(state): State<AppState>,
    Path(id): Path<String>,
    Query(q): Query<FormatQuery>,
    body: Bytes,
) -> ApiResult {
    state.session(&id)?;
    let sketch: PartSketch = parse_json(&body)?;
    coarse_event(state, id, q.format, Event::Sketch { sketch }).await
}

pub async fn put_layout(
    State(state): State<AppState>,
    Path(id): Path<String>,
    Query(q): Query<FormatQuery>,
    body: Bytes,
) -> ApiResult {
    state.session(&id)?;
    let layout: PartLayout = parse_json(&body)?;
    coarse_event(state, id, q.format, Event::Layout { layout }).await
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileBody {
    target: Vec<[f64; 2]>,
}

pub async fn put_profile(
    State(state): State<AppState>,
    Path(id): Path<String>,
    Query(q): Query<FormatQuery>,
    body: Bytes,
) -> ApiResult {
    state.session(&id)?;
    let b: ProfileBody = parse_json(&body)?;
    coarse_event(state, id, q.format, Event::Profile { target: b.target }).await
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StrokesBody {
    #[serde(default)]
    strokes: Vec<Stroke>,
    #[serde(default)]
    symmetric: bool,
}

/// Appends strokes and answers with the preview normal map as PNG.
pub async fn post_strokes(State(state): State<AppState>, Path(id): Path<String>, body: Bytes) -> ApiResult {
    let session = state.session(&id)?;
    let b: StrokesBody = parse_json(&body)?;
    let s = session.clone();
    let png = compute(session, Status::PreviewRunning, move |p| {
        require_sketch(p)?;
        p.push(Event::Strokes {
            strokes: b.strokes,
            symmetric: b.symmetric,
        })?;
        let png = p.preview()?.to_png_bytes()?;
        s.emit(ServerEvent::PreviewReady {
            strokes: p.state().strokes.len(),
            bytes: png.len(),
        });
        Ok(png)
    })
    .await?;
    Ok(([(header::CONTENT_TYPE, "image/png")], png).into_response())
}

pub async fn post_refine(
    State(state): State<AppState>,
    Path(id): Path<String>,
    Query(q): Query<FormatQuery>,
) -> ApiResult {
    let session = state.session(&id)?;
    let s = session.clone();
    let debug_dir = state.config.debug_dir.as_ref().map(|d| d.join(&id));
    let providers = state.config.providers.clone();
    let (mesh, diag, ms) = compute(session, Status::RefineRunning, move |p| {
        require_sketch(p)?;
        let start = Instant::now();
        let (mesh, diag) = p.fine_mesh_debug(&providers, debug_dir.as_deref())?;
        let (mesh, diag) = (mesh.clone(), diag.cloned());
        let ms = ms_since(start);
        s.emit(ServerEvent::MeshReady {
            stage: "fine",
            vertices: mesh.vertices.len(),
            triangles: mesh.triangles.len(),
            ms,
        });
        Ok((mesh, diag, ms))
    })
    .await?;
    mesh_response(q.format, summary("fine", &mesh, ms, diag), &mesh)
}

#[derive(Serialize)]
pub struct Suggestions {
    suggestions: Vec<Suggestion>,
}

pub async fn post_suggest(
    State(state): State<AppState>,
    Path(id): Path<String>,
    body: Bytes,
) -> ApiResult<Json<Suggestions>> {
    state.session(&id)?;
    let mut q: SuggestionQuery = parse_json(&body)?;
    q.top_n = q.top_n.min(MAX_SUGGESTIONS);
    Ok(Json(Suggestions {
        suggestions: state.config.corpus.query(&q),
    }))
}

#[derive(Debug, Clone, Copy, Default, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    #[default]
    Coarse,
    Fine,
}

#[derive(Debug, Default, Deserialize)]
pub struct MeshQuery {
    #[serde(default)]
    stage: Stage,
}

pub async fn get_mesh(State(state): State<AppState>, Path(id): Path<String>, Query(q): Query<MeshQuery>) -> ApiResult {
    let session = state.session(&id)?;
    let snapshot = session.snapshot();
    match q.stage {
        Stage::Fine => match snapshot.cached_fine_mesh() {
            Some(m) => obj_response(m),
            None => Err(ApiError::not_ready("fine mesh is not current; POST refine first")),
        },
        Stage::Coarse => {
            if let Some(m) = snapshot.cached_coarse_mesh() {
                return obj_response(m);
            }
            require_sketch(&snapshot)?;
            let mesh = compute(session, Status::CoarseRunning, |p| Ok(p.coarse_mesh()?.clone())).await?;
            obj_response(&mesh)
        }
    }
}

pub async fn get_project(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult {
    let json = state.session(&id)?.snapshot().to_json()?;
    Ok(([(header::CONTENT_TYPE, "application/json")], json).into_response())
}

#[derive(Serialize)]
pub struct Replaced {
    events: usize,
}

pub async fn put_project(
    State(state): State<AppState>,
    Path(id): Path<String>,
    body: Bytes,
) -> ApiResult<Json<Replaced>> {
    let session = state.session(&id)?;
    let text = std::str::from_utf8(&body).map_err(|e| ApiError::invalid(e.to_string()))?;
    let project = match Project::from_json(text) {
        Ok(p) => p,
        Err(e @ sketchface::Error::Parse { .. }) => {
            // Re-parse for the field path; fall back to the plain error.
            parse_json::<Project>(&body)?;
            return Err(e.into());
        }
        Err(e) => return Err(e.into()),
    };
    let events = project.events.len();
    let status = lock(&session.status);
    if *status != Status::Idle {
        return Err(ApiError::busy(status.as_str()));
    }
    session.commit(project);
    Ok(Json(Replaced { events }))
}

pub async fn events(State(state): State<AppState>, Path(id): Path<String>, ws: WebSocketUpgrade) -> ApiResult {
    let session = state.session(&id)?;
    Ok(ws.on_upgrade(move |socket| pump(socket, session)))
}

async fn pump(mut socket: WebSocket, session: Arc<Session>) {
    let mut rx = session.subscribe();
    let hello = ServerEvent::Status {
        status: session.status(),
    };
    if send(&mut socket, &hello).await.is_err() {
        return;
    }
    loop {
        tokio::select! {
            msg = rx.recv() => match msg {
                Ok(e) => {
                    if send(&mut socket, &e).await.is_err() {
                        return;
                    }
                }
                Err(tokio::sync::broadcast::error::RecvError::Lagged(n)) => {
                    log::warn!("event subscriber lagged by {n}");
                }
                Err(_) => return,
            },
            incoming = socket.recv() => match incoming {
                Some(Ok(Message::Close(_))) | None | Some(Err(_)) => return,
                Some(Ok(_)) => {}
            },
        }
    }
}

async fn send(socket: &mut WebSocket, e: &ServerEvent) -> Result<(), axum::Error> {
    let text = serde_json::to_string(e).expect("events serialize");
    socket.send(Message::Text(text.into())).await
}
