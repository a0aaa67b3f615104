//! Annotation service.
//!
//! Sessions wrap an [`AnnotationSession`] over one frame bundle. Reads take a
//! shared lock on the session, mutations an exclusive one, so edits to a
//! session are applied one at a time while projections run concurrently.
//!
//! | method | path | body |
//! |---|---|---|
//! | POST | `/session` | `{"bundle": path}` |
//! | GET | `/session/{id}` | |
//! | POST | `/session/{id}/vps` | `{"frame", "vp_x", "vp_y"}` |
//! | POST | `/session/{id}/origin` | `{"frame_a", "px_a", "frame_b", "px_b"}` |
//! | POST | `/session/{id}/box` | `{"category", "extents"?}` |
//! | POST | `/session/{id}/box/{b}/move` | `{"face", "delta"}` |
//! | GET | `/session/{id}/box/{b}/project/{frame}` | |
//! | POST | `/session/{id}/box/{b}/propagate` | |
//! | GET | `/session/{id}/export` | |
//! | GET | `/session/{id}/log` | |
//! | GET | `/session/{id}/frame/{frame}` | PNG bytes |

use std::collections::HashMap;
use std::net::SocketAddr;
use std::path::{Path as FsPath, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, RwLock};

use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use eco_core::annotation::{AnnotationSession, BoxId, BoxProjection, BoxRecord, Edit, Face, LabelExport, Propagation};
use eco_core::geometry::{Bundle, CameraIntrinsics};
use eco_core::{Error, ErrorKind};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

type Shared = Arc<RwLock<AnnotationSession>>;

/// Service state: the open sessions and the directory bundle paths are
/// resolved against.
#[derive(Clone, Default)]
pub struct AppState {
    inner: Arc<Inner>,
}

#[derive(Default)]
struct Inner {
    root: Option<PathBuf>,
    sessions: RwLock<HashMap<u64, Shared>>,
    next: AtomicU64,
}

impl AppState {
    /// Relative bundle paths in `POST /session` are resolved against `root`.
    pub fn new(root: Option<PathBuf>) -> Self {
        Self {
            inner: Arc::new(Inner {
                root,
                sessions: RwLock::default(),
                next: AtomicU64::new(1),
            }),
        }
    }

    /// Register a session over an already loaded bundle.
    pub fn open(&self, bundle: Bundle) -> u64 {
        let id = self.inner.next.fetch_add(1, Ordering::Relaxed);
        let session = Arc::new(RwLock::new(AnnotationSession::new(bundle)));
        self.inner
            .sessions
            .write()
            .unwrap_or_else(|e| e.into_inner())
            .insert(id, session);
        id
    }

    fn session(&self, id: u64) -> Result<Shared, ApiError> {
        self.inner
            .sessions
            .read()
            .unwrap_or_else(|e| e.into_inner())
            .get(&id)
            .cloned()
            .ok_or_else(|| Error::NotFound {
                what: "session",
                id: id.to_string(),
            })
            .map_err(ApiError::from)
    }

    fn resolve(&self, path: &str) -> PathBuf {
        match &self.inner.root {
            Some(root) if FsPath::new(path).is_relative() => root.join(path),
            _ => PathBuf::from(path),
        }
    }
}

/// JSON error body `{"error": message, "kind": "input" | "numeric" | "io"}`.
#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    kind: &'static str,
    message: String,
}

#[derive(Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: String,
    pub kind: String,
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        let (status, kind) = match (&e, e.kind()) {
            (Error::NotFound { .. }, _) => (StatusCode::NOT_FOUND, "input"),
            (_, ErrorKind::Input) => (StatusCode::BAD_REQUEST, "input"),
            (_, ErrorKind::Numeric) => (StatusCode::UNPROCESSABLE_ENTITY, "numeric"),
            (_, ErrorKind::Io) => (StatusCode::INTERNAL_SERVER_ERROR, "io"),
        };
        Self {
            status,
            kind,
            message: e.to_string(),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = ErrorBody {
            error: self.message,
            kind: self.kind.to_string(),
        };
        (self.status, Json(body)).into_response()
    }
}

type ApiResult<T> = Result<Json<T>, ApiError>;

fn parse<T: DeserializeOwned>(body: &Bytes) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| ApiError::from(Error::Format(format!("request body: {e}"))))
}

#[derive(Serialize, Deserialize)]
pub struct OpenRequest {
    pub bundle: String,
}

#[derive(Serialize, Deserialize)]
pub struct SessionInfo {
    pub id: u64,
    pub intrinsics: CameraIntrinsics,
    pub frames: Vec<String>,
    pub axes: Option<[f64; 9]>,
    pub origin: Option<[f64; 3]>,
    pub boxes: Vec<BoxRecord>,
}

#[derive(Serialize, Deserialize)]
pub struct VpsRequest {
    pub frame: String,
    pub vp_x: [f64; 2],
    pub vp_y: [f64; 2],
}

#[derive(Serialize, Deserialize)]
pub struct AxesResponse {
    /// Row-major `[x_dir; y_dir; gravity]`.
    pub axes: [f64; 9],
}

#[derive(Serialize, Deserialize)]
pub struct OriginRequest {
    pub frame_a: String,
    pub px_a: [f64; 2],
    pub frame_b: String,
    pub px_b: [f64; 2],
}

#[derive(Serialize, Deserialize)]
pub struct OriginResponse {
    pub origin: [f64; 3],
}

#[derive(Serialize, Deserialize)]
pub struct BoxRequest {
    pub category: String,
    #[serde(default)]
    pub extents: Option<[f64; 6]>,
}

#[derive(Serialize, Deserialize)]
pub struct MoveRequest {
    pub face: Face,
    pub delta: f64,
}

fn info(id: u64, s: &AnnotationSession) -> SessionInfo {
    SessionInfo {
        id,
        intrinsics: s.bundle().intrinsics,
        frames: s.bundle().frames.iter().map(|f| f.id.clone()).collect(),
        axes: s.axes().map(|a| a.to_row_major()),
        origin: s.origin().map(|o| [o.x, o.y, o.z]),
        boxes: s.boxes().map(|(id, c)| BoxRecord::from_cuboid(id, c)).collect(),
    }
}

async fn open_session(State(state): State<AppState>, body: Bytes) -> ApiResult<SessionInfo> {
    let req: OpenRequest = parse(&body)?;
    let bundle = Bundle::load(state.resolve(&req.bundle))?;
    let id = state.open(bundle);
    let session = state.session(id)?;
    let s = session.read().unwrap_or_else(|e| e.into_inner());
    Ok(Json(info(id, &s)))
}

async fn get_session(State(state): State<AppState>, Path(id): Path<u64>) -> ApiResult<SessionInfo> {
    let session = state.session(id)?;
    let s = session.read().unwrap_or_else(|e| e.into_inner());
    Ok(Json(info(id, &s)))
}

async fn set_vps(State(state): State<AppState>, Path(id): Path<u64>, body: Bytes) -> ApiResult<AxesResponse> {
    let req: VpsRequest = parse(&body)?;
    let session = state.session(id)?;
    let mut s = session.write().unwrap_or_else(|e| e.into_inner());
    let axes = s.set_vanishing_points(&req.frame, req.vp_x, req.vp_y)?;
    Ok(Json(AxesResponse {
        axes: axes.to_row_major(),
    }))
}

async fn set_origin(State(state): State<AppState>, Path(id): Path<u64>, body: Bytes) -> ApiResult<OriginResponse> {
    let req: OriginRequest = parse(&body)?;
    let session = state.session(id)?;
    let mut s = session.write().unwrap_or_else(|e| e.into_inner());
    let o = s.triangulate_origin(&req.frame_a, req.px_a, &req.frame_b, req.px_b)?;
    Ok(Json(OriginResponse {
        origin: [o.x, o.y, o.z],
    }))
}

async fn create_box(State(state): State<AppState>, Path(id): Path<u64>, body: Bytes) -> ApiResult<BoxRecord> {
    let req: BoxRequest = parse(&body)?;
    let session = state.session(id)?;
    let mut s = session.write().unwrap_or_else(|e| e.into_inner());
    let b = s.create_box(&req.category, req.extents)?;
    Ok(Json(BoxRecord::from_cuboid(b, s.get_box(b)?)))
}

async fn move_face(
    State(state): State<AppState>,
    Path((id, b)): Path<(u64, BoxId)>,
    body: Bytes,
) -> ApiResult<BoxRecord> {
    let req: MoveRequest = parse(&body)?;
    let session = state.session(id)?;
    let mut s = session.write().unwrap_or_else(|e| e.into_inner());
    let cuboid = s.move_face(b, req.face, req.delta)?;
    Ok(Json(BoxRecord::from_cuboid(b, &cuboid)))
}

async fn project(
    State(state): State<AppState>,
    Path((id, b, frame)): Path<(u64, BoxId, String)>,
) -> ApiResult<BoxProjection> {
    let session = state.session(id)?;
    let s = session.read().unwrap_or_else(|e| e.into_inner());
    Ok(Json(s.project_box(b, &frame)?))
}

async fn propagate(State(state): State<AppState>, Path((id, b)): Path<(u64, BoxId)>) -> ApiResult<Propagation> {
    let session = state.session(id)?;
    let s = session.read().unwrap_or_else(|e| e.into_inner());
    Ok(Json(s.propagate(b)?))
}

async fn export(State(state): State<AppState>, Path(id): Path<u64>) -> ApiResult<LabelExport> {
    let session = state.session(id)?;
    let s = session.read().unwrap_or_else(|e| e.into_inner());
    Ok(Json(s.export()))
}

async fn edit_log(State(state): State<AppState>, Path(id): Path<u64>) -> ApiResult<Vec<Edit>> {
    let session = state.session(id)?;
    let s = session.read().unwrap_or_else(|e| e.into_inner());
    Ok(Json(s.log().to_vec()))
}

async fn frame_image(
    State(state): State<AppState>,
    Path((id, frame)): Path<(u64, String)>,
) -> Result<Response, ApiError> {
    let path = {
        let session = state.session(id)?;
        let s = session.read().unwrap_or_else(|e| e.into_inner());
        let f = s.bundle().frame(&frame)?;
        s.bundle().image_path(f)
    };
    let bytes = tokio::fs::read(&path).await.map_err(Error::from)?;
    Ok(([(header::CONTENT_TYPE, "image/png")], bytes).into_response())
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/session", post(open_session))
        .route("/session/{id}", get(get_session))
        .route("/session/{id}/vps", post(set_vps))
        .route("/session/{id}/origin", post(set_origin))
        .route("/session/{id}/box", post(create_box))
        .route("/session/{id}/box/{b}/move", post(move_face))
        .route("/session/{id}/box/{b}/project/{frame}", get(project))
        .route("/session/{id}/box/{b}/propagate", post(propagate))
        .route("/session/{id}/export", get(export))
        .route("/session/{id}/log", get(edit_log))
        .route("/session/{id}/frame/{frame}", get(frame_image))
        .with_state(state)
}

/// Bind `addr` and serve until ctrl-c.
pub async fn serve(addr: SocketAddr, state: AppState) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    eprintln!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
