//! HTTP service for annotation sessions and live inter-annotator agreement.
//!
//! | Method | Path | Purpose |
//! |---|---|---|
//! | GET | `/api/catalog?stage=` | guideline rules, optionally one stage |
//! | POST | `/api/session` | open a session, returns its write token |
//! | GET | `/api/session/:id` | session resource |
//! | GET | `/api/session/:id/next` | next undecided comment |
//! | POST | `/api/session/:id/label?amend=` | submit a decision |
//! | GET | `/api/agreement?a=&b=&level=` | kappa between two sessions |
//!
//! Writes need the `X-Session-Token` header returned at creation. Errors are
//! JSON `{code, message}`.

mod error;
mod store;

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use axum::extract::{Path, Query, State};
use axum::http::{header, HeaderMap, HeaderValue, Method, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use chrono::Utc;
use ruhs_core::agreement::{kappa, table_over_intersection, AgreementReport, AgreementTable, CoverageError, Level};
use ruhs_core::annotate::{decide, rule_catalog, GuidelineRule, SessionError, SubmitOutcome, CATALOG_VERSION};
use ruhs_core::{AnnotationSession, LabelPath, RuleId, Stage};
use serde::{Deserialize, Serialize};
use tower_http::cors::{AllowOrigin, Any, CorsLayer};
use tower_http::services::ServeDir;

pub use error::ApiError;
pub use store::{Comment, StoreError};

use store::{Slot, Store, SubmitError};

pub const TOKEN_HEADER: &str = "x-session-token";

#[derive(Debug, Clone, Default)]
pub struct ServerOptions {
    /// Directory for session event logs; `None` keeps sessions in memory.
    pub session_dir: Option<PathBuf>,
    /// Static bundle served for non-API paths.
    pub static_dir: Option<PathBuf>,
    /// Allowed CORS origin; any origin when unset.
    pub cors_origin: Option<String>,
}

#[derive(Clone)]
pub struct AppState {
    store: Arc<Store>,
}

impl AppState {
    pub fn new(comments: Vec<Comment>, session_dir: Option<PathBuf>) -> Result<Self, StoreError> {
        Ok(AppState {
            store: Arc::new(Store::open(comments, session_dir)?),
        })
    }
}

pub fn router(state: AppState, opts: &ServerOptions) -> Router {
    let origin = match opts.cors_origin.as_deref().map(HeaderValue::from_str) {
        Some(Ok(v)) => AllowOrigin::exact(v),
        _ => AllowOrigin::any(),
    };
    let cors = CorsLayer::new()
        .allow_origin(origin)
        .allow_methods([Method::GET, Method::POST])
        .allow_headers(Any)
        .expose_headers([header::ETAG]);
    let api = Router::new()
        .route("/api/catalog", get(catalog))
        .route("/api/session", post(create_session))
        .route("/api/session/:id", get(session_resource))
        .route("/api/session/:id/next", get(next_comment))
        .route("/api/session/:id/label", post(label))
        .route("/api/agreement", get(agreement))
        .with_state(state);
    let app = match &opts.static_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api,
    };
    app.layer(cors)
}

/// Builds the state, binds `addr` and serves until the process exits.
pub async fn serve(addr: SocketAddr, comments: Vec<Comment>, opts: ServerOptions) -> std::io::Result<()> {
    let state = AppState::new(comments, opts.session_dir.clone()).map_err(std::io::Error::other)?;
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(state, &opts)).await
}

// Catalog

#[derive(Deserialize)]
struct CatalogQuery {
    stage: Option<String>,
}

#[derive(Serialize)]
struct CatalogBody {
    version: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    stage: Option<Stage>,
    rules: Vec<&'static GuidelineRule>,
}

async fn catalog(Query(q): Query<CatalogQuery>, headers: HeaderMap) -> Result<Response, ApiError> {
    let stage = match q.stage.as_deref() {
        None | Some("") => None,
        Some(s) => Some(s.parse::<Stage>().map_err(ApiError::BadQuery)?),
    };
    let etag = match stage {
        Some(s) => format!("\"{CATALOG_VERSION}-{s:?}\""),
        None => format!("\"{CATALOG_VERSION}\""),
    };
    let etag_value = HeaderValue::from_str(&etag).expect("ascii etag");
    let fresh = headers
        .get_all(header::IF_NONE_MATCH)
        .iter()
        .filter_map(|v| v.to_str().ok())
        .flat_map(|v| v.split(','))
        .any(|t| t.trim() == etag || t.trim() == "*");
    if fresh {
        return Ok((StatusCode::NOT_MODIFIED, [(header::ETAG, etag_value)]).into_response());
    }
    let rules = rule_catalog().into_iter().filter(|r| stage.is_none_or(|s| r.stage == s)).collect();
    let body = CatalogBody {
        version: CATALOG_VERSION,
        stage,
        rules,
    };
    Ok(([(header::ETAG, etag_value)], Json(body)).into_response())
}

// Sessions

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Progress {
    pub decided: usize,
    pub total: usize,
    pub fraction: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct NextComment {
    pub comment_id: String,
    pub text: String,
    pub position: usize,
}

/// Wire form of an annotation session.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SessionResource {
    pub session_id: String,
    pub annotator: String,
    pub queue: Vec<String>,
    pub progress: Progress,
    pub complete: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub next: Option<NextComment>,
    pub catalog_version: String,
}

fn progress(s: &AnnotationSession) -> Progress {
    let (decided, total) = s.progress();
    Progress {
        decided,
        total,
        fraction: if total == 0 { 1.0 } else { decided as f64 / total as f64 },
    }
}

fn next_of(store: &Store, s: &AnnotationSession) -> Option<NextComment> {
    s.current().map(|id| NextComment {
        comment_id: id.to_string(),
        text: store.comment_text(id).unwrap_or_default().to_string(),
        position: s.cursor,
    })
}

fn resource(store: &Store, s: &AnnotationSession) -> SessionResource {
    SessionResource {
        session_id: s.session_id.clone(),
        annotator: s.annotator.clone(),
        queue: s.queue.clone(),
        progress: progress(s),
        complete: s.is_complete(),
        next: next_of(store, s),
        catalog_version: CATALOG_VERSION.to_string(),
    }
}

fn slot(state: &AppState, id: &str) -> Result<Arc<Slot>, ApiError> {
    state.store.get(id).ok_or_else(|| ApiError::UnknownSession(id.to_string()))
}

#[derive(Debug, Deserialize)]
struct CreateSession {
    annotator: String,
    #[serde(default)]
    session_id: Option<String>,
    /// Defaults to every loaded comment in load order.
    #[serde(default)]
    queue: Option<Vec<String>>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct CreatedSession {
    pub token: String,
    pub session: SessionResource,
}

fn valid_session_id(id: &str) -> bool {
    !id.is_empty() && id.len() <= 64 && id.bytes().all(|b| b.is_ascii_alphanumeric() || b == b'-' || b == b'_')
}

async fn create_session(
    State(state): State<AppState>,
    Json(body): Json<CreateSession>,
) -> Result<(StatusCode, Json<CreatedSession>), ApiError> {
    let id = body
        .session_id
        .unwrap_or_else(|| format!("s-{}", &uuid::Uuid::new_v4().simple().to_string()[..12]));
    if !valid_session_id(&id) {
        return Err(ApiError::BadQuery(format!(
            "session id {id:?} must be 1-64 characters of letters, digits, '-' or '_'"
        )));
    }
    if body.annotator.trim().is_empty() {
        return Err(ApiError::BadQuery("annotator must not be empty".into()));
    }
    let queue = body.queue.unwrap_or_else(|| state.store.all_comment_ids());
    if let Some(unknown) = queue.iter().find(|c| !state.store.has_comment(c)) {
        return Err(ApiError::UnknownComment(unknown.clone()));
    }
    let mut seen = std::collections::BTreeSet::new();
    if let Some(dup) = queue.iter().find(|c| !seen.insert(c.as_str())) {
        return Err(ApiError::BadQuery(format!("comment {dup:?} appears twice in the queue")));
    }
    let (slot, token) = state
        .store
        .create(id.clone(), body.annotator, queue, Utc::now())
        .map_err(ApiError::Storage)?
        .ok_or(ApiError::SessionExists(id))?;
    let session = resource(&state.store, &slot.snapshot());
    Ok((StatusCode::CREATED, Json(CreatedSession { token, session })))
}

async fn session_resource(
    State(state): State<AppState>,
    Path(id): Path<String>,
) -> Result<Json<SessionResource>, ApiError> {
    let s = slot(&state, &id)?.snapshot();
    Ok(Json(resource(&state.store, &s)))
}

#[derive(Debug, Serialize, Deserialize)]
pub struct NextBody {
    pub progress: Progress,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub next: Option<NextComment>,
}

async fn next_comment(State(state): State<AppState>, Path(id): Path<String>) -> Result<Json<NextBody>, ApiError> {
    let s = slot(&state, &id)?.snapshot();
    Ok(Json(NextBody {
        progress: progress(&s),
        next: next_of(&state.store, &s),
    }))
}

/// A decision as submitted by a client.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LabelRequest {
    pub comment_id: String,
    pub rules: Vec<String>,
    /// Optional client-side view of the outcome; must match the server's.
    #[serde(default)]
    pub path: Option<LabelPath>,
}

#[derive(Deserialize)]
struct LabelQuery {
    #[serde(default)]
    amend: bool,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct LabelResponse {
    pub comment_id: String,
    pub path: LabelPath,
    pub summary: String,
    pub amended: bool,
    pub progress: Progress,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub next: Option<NextComment>,
}

/// Validates a submission exactly as the library does: the rules must
/// parse and `decide` must accept them. A client path, if sent, must be
/// well formed and agree with the decided one.
pub fn validate_label(req: &LabelRequest) -> Result<LabelPath, ApiError> {
    let rules = req
        .rules
        .iter()
        .map(|r| r.trim().parse::<RuleId>())
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| ApiError::InvalidLabel(e.to_string()))?;
    let decided = decide(&rules).map_err(|e| ApiError::InvalidLabel(e.to_string()))?;
    if let Some(claimed) = &req.path {
        claimed.validate().map_err(|e| ApiError::InvalidLabel(e.to_string()))?;
        if (claimed.top, claimed.structure, claimed.fine) != (decided.top, decided.structure, decided.fine) {
            return Err(ApiError::InvalidLabel(format!(
                "submitted path {} disagrees with the rules, which give {}",
                claimed.short(),
                decided.short()
            )));
        }
    }
    Ok(decided)
}

async fn label(
    State(state): State<AppState>,
    Path(id): Path<String>,
    Query(q): Query<LabelQuery>,
    headers: HeaderMap,
    Json(req): Json<LabelRequest>,
) -> Result<Json<LabelResponse>, ApiError> {
    let slot = slot(&state, &id)?;
    let token = headers.get(TOKEN_HEADER).and_then(|v| v.to_str().ok());
    if token != Some(slot.token.as_str()) {
        return Err(ApiError::Unauthorized);
    }
    let path = validate_label(&req)?;
    let (outcome, s) = state
        .store
        .submit(&slot, &req.comment_id, path.clone(), q.amend, Utc::now())
        .map_err(|e| match e {
            SubmitError::AlreadyLabeled => ApiError::AlreadyLabeled(req.comment_id.clone()),
            SubmitError::Storage(m) => ApiError::Storage(m),
            SubmitError::Session(e @ SessionError::OutOfOrder { .. }) => ApiError::OutOfOrder(e.to_string()),
            SubmitError::Session(SessionError::UnknownComment(c)) => ApiError::UnknownComment(c),
            SubmitError::Session(SessionError::InvalidPath(m)) => ApiError::InvalidLabel(m),
        })?;
    Ok(Json(LabelResponse {
        comment_id: req.comment_id,
        summary: path.short(),
        path,
        amended: outcome == SubmitOutcome::Amended,
        progress: progress(&s),
        next: next_of(&state.store, &s),
    }))
}

// Agreement

#[derive(Deserialize)]
struct AgreementQuery {
    a: String,
    b: String,
    level: Option<String>,
}

#[derive(Debug, Serialize, Deserialize, PartialEq, Eq)]
pub struct Disagreement {
    pub comment_id: String,
    pub a: String,
    pub b: String,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct AgreementBody {
    pub a: String,
    pub b: String,
    pub level: Level,
    pub report: AgreementReport,
    pub table: AgreementTable,
    pub partial: bool,
    pub compared: usize,
    pub disagreements: Vec<Disagreement>,
}

async fn agreement(
    State(state): State<AppState>,
    Query(q): Query<AgreementQuery>,
) -> Result<Json<AgreementBody>, ApiError> {
    let level: Level = q.level.as_deref().unwrap_or("top").parse().map_err(ApiError::BadQuery)?;
    let s1 = slot(&state, &q.a)?.snapshot();
    let s2 = slot(&state, &q.b)?.snapshot();
    let partial = table_over_intersection(&s1, &s2, level).map_err(|e| match e {
        CoverageError::Disjoint => ApiError::Disjoint,
        other => ApiError::Agreement(other.to_string()),
    })?;
    let report = kappa(&partial.table).map_err(|e| ApiError::Agreement(e.to_string()))?;
    let disagreements = s1
        .decisions
        .iter()
        .filter_map(|(id, p1)| {
            let p2 = s2.decisions.get(id)?;
            let differs = match level {
                Level::Top => p1.top != p2.top,
                Level::Fine => p1.fine.is_some() && p2.fine.is_some() && p1.fine != p2.fine,
            };
            differs.then(|| Disagreement {
                comment_id: id.clone(),
                a: p1.short(),
                b: p2.short(),
            })
        })
        .collect();
    Ok(Json(AgreementBody {
        a: q.a,
        b: q.b,
        level,
        report,
        table: partial.table,
        partial: partial.partial,
        compared: partial.compared,
        disagreements,
    }))
}
