//! HTTP/JSON front end for refinement sessions.
//!
//! | method | path                              | body                      |
//! |--------|-----------------------------------|---------------------------|
//! | POST   | `/v1/datasets`                    | `{csv}`                   |
//! | POST   | `/v1/sessions`                    | see [`CreateSession`]     |
//! | GET    | `/v1/sessions/{id}`               |                           |
//! | POST   | `/v1/sessions/{id}/expand`        | `{node_id}`               |
//! | POST   | `/v1/sessions/{id}/collapse`      | `{node_id}`               |
//! | POST   | `/v1/sessions/{id}/simplify`      |                           |
//! | POST   | `/v1/sessions/{id}/restart`       | `{hyperparams}`           |
//! | POST   | `/v1/sessions/{id}/revert`        | `{iteration}`             |
//! | POST   | `/v1/sessions/{id}/finalize`      |                           |
//! | GET    | `/v1/sessions/{id}/export`        |                           |
//!
//! Mutations return the updated [`SessionView`]; failures return
//! `{code, message}` with a 4xx status.

mod error;
mod view;

use std::collections::HashMap;
use std::net::SocketAddr;
use std::sync::{Arc, RwLock};

use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::routing::{get, post};
use axum::{Json, Router};
use permreg::data::{parse_csv, split, SplitSpec};
use permreg::session::{NodeId, Session, SessionExport};
use permreg::{Dataset, Hyperparams};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use tokio::net::TcpListener;

pub use error::{ApiError, ErrorBody};
pub use view::{NodeView, SessionView};

#[derive(Debug, Clone)]
pub struct ServerConfig {
    pub bind: SocketAddr,
    pub max_sessions: usize,
    pub max_dataset_rows: usize,
}

impl Default for ServerConfig {
    fn default() -> Self {
        ServerConfig {
            bind: ([127, 0, 0, 1], 8080).into(),
            max_sessions: 256,
            max_dataset_rows: 100_000,
        }
    }
}

type SharedSession = Arc<RwLock<Session>>;

#[derive(Clone)]
pub struct AppState {
    inner: Arc<Inner>,
}

struct Inner {
    config: ServerConfig,
    sessions: RwLock<HashMap<String, SharedSession>>,
    datasets: RwLock<HashMap<String, Arc<Dataset>>>,
}

impl AppState {
    pub fn new(config: ServerConfig) -> Self {
        AppState {
            inner: Arc::new(Inner {
                config,
                sessions: RwLock::default(),
                datasets: RwLock::default(),
            }),
        }
    }

    fn session(&self, id: &str) -> Result<SharedSession, ApiError> {
        self.inner
            .sessions
            .read()
            .expect("session registry poisoned")
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::unknown_session(id))
    }

    fn dataset(&self, id: &str) -> Result<Arc<Dataset>, ApiError> {
        self.inner
            .datasets
            .read()
            .expect("dataset registry poisoned")
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::unknown_dataset(id))
    }
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/health", get(|| async { "ok" }))
        .route("/v1/datasets", post(create_dataset))
        .route("/v1/sessions", post(create_session))
        .route("/v1/sessions/{id}", get(get_session))
        .route("/v1/sessions/{id}/expand", post(expand))
        .route("/v1/sessions/{id}/collapse", post(collapse))
        .route("/v1/sessions/{id}/simplify", post(simplify))
        .route("/v1/sessions/{id}/restart", post(restart))
        .route("/v1/sessions/{id}/revert", post(revert))
        .route("/v1/sessions/{id}/finalize", post(finalize))
        .route("/v1/sessions/{id}/export", get(export))
        .with_state(state)
}

pub async fn serve_on(listener: TcpListener, state: AppState) -> std::io::Result<()> {
    axum::serve(listener, router(state)).await
}

pub async fn serve(config: ServerConfig) -> std::io::Result<()> {
    let listener = TcpListener::bind(config.bind).await?;
    tracing::info!("listening on {}", listener.local_addr()?);
    serve_on(listener, AppState::new(config)).await
}

fn parse<T: DeserializeOwned>(body: &Bytes) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| ApiError::bad_request(e.to_string()))
}

#[derive(Debug, Serialize, Deserialize)]
pub struct CreateDataset {
    pub csv: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetInfo {
    pub dataset_id: String,
    pub n_items: usize,
    pub rows: usize,
}

/// A dataset given inline or by registry id.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DatasetRef {
    Id { id: String },
    Csv { csv: String },
}

/// Either one dataset plus a split, or three pre-split datasets.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CreateSession {
    pub hyperparams: Hyperparams,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dataset: Option<DatasetRef>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split: Option<SplitSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub train: Option<DatasetRef>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub validation: Option<DatasetRef>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub test: Option<DatasetRef>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct NodeRequest {
    pub node_id: NodeId,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct RestartRequest {
    pub hyperparams: Hyperparams,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct RevertRequest {
    pub iteration: usize,
}

#[derive(Serialize)]
struct ExportBody<'a> {
    session_id: &'a str,
    #[serde(flatten)]
    export: SessionExport<'a>,
}

impl AppState {
    fn parse_dataset(&self, csv: &str) -> Result<Dataset, ApiError> {
        let ds = parse_csv(csv)?;
        let limit = self.inner.config.max_dataset_rows;
        if ds.len() > limit {
            return Err(ApiError::new(
                StatusCode::PAYLOAD_TOO_LARGE,
                "TooManyRows",
                format!("dataset has {} rows, limit is {limit}", ds.len()),
            ));
        }
        Ok(ds)
    }

    fn resolve(&self, r: &DatasetRef) -> Result<Arc<Dataset>, ApiError> {
        match r {
            DatasetRef::Id { id } => self.dataset(id),
            DatasetRef::Csv { csv } => self.parse_dataset(csv).map(Arc::new),
        }
    }
}

async fn create_dataset(
    State(state): State<AppState>,
    body: Bytes,
) -> Result<(StatusCode, Json<DatasetInfo>), ApiError> {
    let req: CreateDataset = parse(&body)?;
    let st = state.clone();
    let ds = tokio::task::spawn_blocking(move || st.parse_dataset(&req.csv))
        .await
        .expect("parser task panicked")?;
    let info = DatasetInfo {
        dataset_id: uuid::Uuid::new_v4().to_string(),
        n_items: ds.n_items(),
        rows: ds.len(),
    };
    state
        .inner
        .datasets
        .write()
        .expect("dataset registry poisoned")
        .insert(info.dataset_id.clone(), Arc::new(ds));
    Ok((StatusCode::CREATED, Json(info)))
}

async fn create_session(
    State(state): State<AppState>,
    body: Bytes,
) -> Result<(StatusCode, Json<SessionView>), ApiError> {
    let req: CreateSession = parse(&body)?;
    let st = state.clone();
    let session = tokio::task::spawn_blocking(move || -> Result<Session, ApiError> {
        let (train, validation, test) = match (
            &req.dataset,
            &req.split,
            &req.train,
            &req.validation,
            &req.test,
        ) {
            (Some(ds), Some(spec), None, None, None) => {
                let s = split(&*st.resolve(ds)?, spec)?;
                (s.train, s.validation, s.test)
            }
            (None, None, Some(tr), Some(va), Some(te)) => (
                (*st.resolve(tr)?).clone(),
                (*st.resolve(va)?).clone(),
                (*st.resolve(te)?).clone(),
            ),
            _ => {
                return Err(ApiError::bad_request(
                    "give either `dataset` with `split`, or `train`, `validation` and `test`",
                ))
            }
        };
        Ok(Session::create(train, validation, test, req.hyperparams)?)
    })
    .await
    .expect("session task panicked")?;

    let id = uuid::Uuid::new_v4().to_string();
    let view = SessionView::of(&id, &session);
    {
        let mut sessions = state
            .inner
            .sessions
            .write()
            .expect("session registry poisoned");
        if sessions.len() >= state.inner.config.max_sessions {
            return Err(ApiError::new(
                StatusCode::TOO_MANY_REQUESTS,
                "TooManySessions",
                format!("session limit {} reached", state.inner.config.max_sessions),
            ));
        }
        sessions.insert(id, Arc::new(RwLock::new(session)));
    }
    Ok((StatusCode::CREATED, Json(view)))
}

async fn get_session(
    State(state): State<AppState>,
    Path(id): Path<String>,
) -> Result<Json<SessionView>, ApiError> {
    let session = state.session(&id)?;
    let guard = session.read().expect("session poisoned");
    Ok(Json(SessionView::of(&id, &guard)))
}

/// Applies `op` under the session's write lock on a blocking thread and
/// returns the view taken under the same lock.
async fn mutate<F>(state: AppState, id: String, op: F) -> Result<Json<SessionView>, ApiError>
where
    F: FnOnce(&mut Session) -> permreg::Result<()> + Send + 'static,
{
    let session = state.session(&id)?;
    tokio::task::spawn_blocking(move || {
        let mut guard = session.write().expect("session poisoned");
        op(&mut guard)?;
        Ok(Json(SessionView::of(&id, &guard)))
    })
    .await
    .expect("session task panicked")
}

async fn expand(
    State(state): State<AppState>,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<Json<SessionView>, ApiError> {
    let req: NodeRequest = parse(&body)?;
    mutate(state, id, move |s| s.expand(req.node_id).map(drop)).await
}

async fn collapse(
    State(state): State<AppState>,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<Json<SessionView>, ApiError> {
    let req: NodeRequest = parse(&body)?;
    mutate(state, id, move |s| s.collapse(req.node_id).map(drop)).await
}

async fn simplify(
    State(state): State<AppState>,
    Path(id): Path<String>,
) -> Result<Json<SessionView>, ApiError> {
    mutate(state, id, |s| s.simplify().map(drop)).await
}

async fn restart(
    State(state): State<AppState>,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<Json<SessionView>, ApiError> {
    let req: RestartRequest = parse(&body)?;
    mutate(state, id, move |s| s.restart(req.hyperparams).map(drop)).await
}

async fn revert(
    State(state): State<AppState>,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<Json<SessionView>, ApiError> {
    let req: RevertRequest = parse(&body)?;
    mutate(state, id, move |s| s.revert(req.iteration).map(drop)).await
}

async fn finalize(
    State(state): State<AppState>,
    Path(id): Path<String>,
) -> Result<Json<SessionView>, ApiError> {
    mutate(state, id, |s| s.finalize().map(drop)).await
}

async fn export(
    State(state): State<AppState>,
    Path(id): Path<String>,
) -> Result<Json<serde_json::Value>, ApiError> {
    let session = state.session(&id)?;
    let guard = session.read().expect("session poisoned");
    let body = ExportBody {
        session_id: &id,
        export: guard.export(),
    };
    Ok(Json(serde_json::to_value(&body).map_err(|e| {
        ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "Internal", e.to_string())
    })?))
}
