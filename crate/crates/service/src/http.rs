//! JSON over HTTP. Every GET is a pure read of an immutable session; filters
//! arrive with each request and are never stored.

use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::rejection::{PathRejection, QueryRejection};
use axum::extract::{DefaultBodyLimit, Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::Router;
use serde::Serialize;

use forestview_core::datasets::BUILTIN_NAMES;
use forestview_core::TrainParams;

use crate::engine::Engine;
use crate::error::{Diagnostic, Result, ServiceError};
use crate::payload::{self, render};
use crate::session::{new_id, CsvOptions, Session};

pub const MAX_UPLOAD_BYTES: usize = 256 * 1024 * 1024;

#[derive(Serialize)]
struct ErrorBody<'a> {
    error: &'static str,
    message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    diagnostic: Option<&'a Diagnostic>,
}

impl IntoResponse for ServiceError {
    fn into_response(self) -> Response {
        let status = match self {
            ServiceError::SessionNotFound(_) | ServiceError::ClusterNotFound { .. } => StatusCode::NOT_FOUND,
            ServiceError::BadRequest { .. } => StatusCode::BAD_REQUEST,
            ServiceError::Store { .. } | ServiceError::Internal(_) => StatusCode::INTERNAL_SERVER_ERROR,
        };
        if status.is_server_error() {
            tracing::error!("{self}");
        }
        let diagnostic = match &self {
            ServiceError::BadRequest { diagnostic, .. } => diagnostic.as_ref(),
            _ => None,
        };
        let body = ErrorBody {
            error: self.kind(),
            message: self.to_string(),
            diagnostic,
        };
        let bytes = serde_json::to_vec(&body).unwrap_or_default();
        (status, [(header::CONTENT_TYPE, "application/json")], bytes).into_response()
    }
}

fn json(status: StatusCode, bytes: Vec<u8>) -> Response {
    (status, [(header::CONTENT_TYPE, "application/json")], bytes).into_response()
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> Result<T> + Send + 'static) -> Result<T> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ServiceError::Internal(format!("worker failed: {e}")))?
}

type Params = Vec<(String, String)>;

fn query(q: std::result::Result<Query<Params>, QueryRejection>) -> Result<Params> {
    q.map(|Query(p)| p).map_err(|e| ServiceError::bad_request(e.body_text()))
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| ServiceError::bad_request(format!("bad value `{value}` for `{key}`")))
}

/// `m` plus any number of `filter` clauses.
fn view_params(params: &Params) -> Result<(Option<usize>, Vec<&str>)> {
    let mut m = None;
    let mut filters = Vec::new();
    for (k, v) in params {
        match k.as_str() {
            "m" => m = Some(parse(k, v)?),
            "filter" => filters.push(v.as_str()),
            _ => return Err(ServiceError::bad_request(format!("unknown query parameter `{k}`"))),
        }
    }
    Ok((m, filters))
}

/// Train parameters over the engine defaults, plus CSV reading options.
pub fn train_params(defaults: &TrainParams, params: &Params) -> Result<(TrainParams, CsvOptions)> {
    let mut p = defaults.clone();
    let mut csv = CsvOptions::default();
    for (k, v) in params {
        match k.as_str() {
            "trees" => p.n_trees = parse(k, v)?,
            "max_depth" => p.max_depth = if v.is_empty() { None } else { Some(parse(k, v)?) },
            "min_samples_split" => p.min_samples_split = parse(k, v)?,
            "features_per_split" => p.features_per_split = if v.is_empty() { None } else { Some(parse(k, v)?) },
            "bootstrap" => p.bootstrap = parse(k, v)?,
            "seed" => p.seed = parse(k, v)?,
            "test_fraction" => p.test_fraction = parse(k, v)?,
            "name" => csv.name = Some(v.clone()),
            "label" => csv.label = Some(v.clone()),
            "categorical" => csv.categorical.extend(v.split(',').map(str::trim).filter(|s| !s.is_empty()).map(String::from)),
            _ => return Err(ServiceError::bad_request(format!("unknown query parameter `{k}`"))),
        }
    }
    p.validate()?;
    Ok((p, csv))
}

fn created(engine: &Engine, session: Session) -> Result<Response> {
    let session = engine.insert(session)?;
    tracing::info!(id = session.id(), trees = session.forest().len(), "session created");
    Ok(json(StatusCode::CREATED, render(&payload::session_info(&session))?))
}

async fn create_csv(
    State(engine): State<Arc<Engine>>,
    q: std::result::Result<Query<Params>, QueryRejection>,
    body: Bytes,
) -> Result<Response> {
    let (params, csv) = train_params(engine.defaults(), &query(q)?)?;
    blocking(move || created(&engine, Session::from_csv(new_id(), &body, &csv, &params)?)).await
}

async fn create_forest(State(engine): State<Arc<Engine>>, body: Bytes) -> Result<Response> {
    blocking(move || created(&engine, Session::from_interchange(new_id(), &body)?)).await
}

async fn create_builtin(
    State(engine): State<Arc<Engine>>,
    Path(name): Path<String>,
    q: std::result::Result<Query<Params>, QueryRejection>,
) -> Result<Response> {
    let (params, csv) = train_params(engine.defaults(), &query(q)?)?;
    if csv.label.is_some() || csv.name.is_some() || !csv.categorical.is_empty() {
        return Err(ServiceError::bad_request("built-in datasets take train parameters only"));
    }
    blocking(move || created(&engine, Session::from_builtin(new_id(), &name, &params)?)).await
}

async fn builtins() -> Result<Response> {
    Ok(json(StatusCode::OK, render(&BUILTIN_NAMES)?))
}

async fn health() -> Response {
    json(StatusCode::OK, b"{\"status\":\"ok\"}\n".to_vec())
}

/// Runs `f` against the session on a worker thread and renders the result.
async fn read<T: Serialize>(
    engine: Arc<Engine>,
    id: String,
    f: impl FnOnce(&Session) -> Result<T> + Send + 'static,
) -> Result<Response> {
    blocking(move || {
        let session = engine.get(&id)?;
        render(&f(&session)?)
    })
    .await
    .map(|bytes| json(StatusCode::OK, bytes))
}

fn path<T>(p: std::result::Result<Path<T>, PathRejection>) -> Result<T> {
    p.map(|Path(v)| v).map_err(|e| ServiceError::bad_request(e.body_text()))
}

async fn session_info(State(engine): State<Arc<Engine>>, Path(id): Path<String>) -> Result<Response> {
    read(engine, id, |s| Ok(payload::session_info(s))).await
}

async fn overview(State(engine): State<Arc<Engine>>, Path(id): Path<String>) -> Result<Response> {
    read(engine, id, payload::overview).await
}

async fn projection(
    State(engine): State<Arc<Engine>>,
    Path(id): Path<String>,
    q: std::result::Result<Query<Params>, QueryRejection>,
) -> Result<Response> {
    let params = query(q)?;
    let (m, filters) = view_params(&params)?;
    if !filters.is_empty() {
        return Err(ServiceError::bad_request("projection takes no filter"));
    }
    read(engine, id, move |s| payload::projection(s, m)).await
}

async fn clusters(
    State(engine): State<Arc<Engine>>,
    Path(id): Path<String>,
    q: std::result::Result<Query<Params>, QueryRejection>,
) -> Result<Response> {
    let params = query(q)?;
    read(engine, id, move |s| {
        let (m, filters) = view_params(&params)?;
        payload::clusters(s, m, &payload::parse_filter(s, filters)?)
    })
    .await
}

async fn cluster(
    State(engine): State<Arc<Engine>>,
    p: std::result::Result<Path<(String, usize)>, PathRejection>,
    q: std::result::Result<Query<Params>, QueryRejection>,
) -> Result<Response> {
    let (id, c) = path(p)?;
    let params = query(q)?;
    read(engine, id, move |s| {
        let (m, filters) = view_params(&params)?;
        payload::cluster(s, m, c, &payload::parse_filter(s, filters)?)
    })
    .await
}

async fn trees(
    State(engine): State<Arc<Engine>>,
    p: std::result::Result<Path<(String, usize)>, PathRejection>,
    q: std::result::Result<Query<Params>, QueryRejection>,
) -> Result<Response> {
    let (id, c) = path(p)?;
    let params = query(q)?;
    let (m, filters) = view_params(&params)?;
    if !filters.is_empty() {
        return Err(ServiceError::bad_request("tree layouts take no filter"));
    }
    read(engine, id, move |s| payload::trees(s, m, c)).await
}

async fn not_found() -> Response {
    json(
        StatusCode::NOT_FOUND,
        b"{\"error\":\"not_found\",\"message\":\"no such endpoint\"}".to_vec(),
    )
}

pub fn router(engine: Arc<Engine>) -> Router {
    Router::new()
        .route("/api/health", get(health))
        .route("/api/builtins", get(builtins))
        .route("/api/sessions/csv", post(create_csv))
        .route("/api/sessions/forest", post(create_forest))
        .route("/api/sessions/builtin/:name", post(create_builtin))
        .route("/api/sessions/:id", get(session_info))
        .route("/api/sessions/:id/overview", get(overview))
        .route("/api/sessions/:id/projection", get(projection))
        .route("/api/sessions/:id/clusters", get(clusters))
        .route("/api/sessions/:id/clusters/:cluster", get(cluster))
        .route("/api/sessions/:id/clusters/:cluster/trees", get(trees))
        .fallback(not_found)
        .layer(DefaultBodyLimit::max(MAX_UPLOAD_BYTES))
        .with_state(engine)
}

/// Serves until ctrl-c.
pub async fn serve(engine: Arc<Engine>, addr: std::net::SocketAddr) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(engine))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
