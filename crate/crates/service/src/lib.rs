//! HTTP/JSON front end for a read-only [`Engine`] snapshot.
//!
//! | route               | method | body / query                                  |
//! |---------------------|--------|-----------------------------------------------|
//! | `/api/health`       | GET    |                                               |
//! | `/api/search`       | GET    | `q, lat, lon, radius_m, alpha, k, method`     |
//! | `/api/ask`          | POST   | `{question, lat?, lon?, radius_m?, alpha?}`   |
//! | `/api/doc/{id}`     | GET    |                                               |
//!
//! Errors are JSON [`ApiError`] bodies: 400 with per-field messages for bad
//! parameters, 404 for unknown documents and routes.

use std::collections::HashMap;
use std::net::SocketAddr;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use tokio::net::TcpListener;
use tokio::task::JoinHandle;
use toposearch::api::{self, ApiError, AskRequest, ErrorKind, SearchParams};
use toposearch::engine::Engine;
use tracing::{error, info};

struct Failure(ApiError);

impl IntoResponse for Failure {
    fn into_response(self) -> Response {
        let status = match self.0.kind {
            ErrorKind::BadRequest => StatusCode::BAD_REQUEST,
            ErrorKind::NotFound => StatusCode::NOT_FOUND,
            ErrorKind::Internal => StatusCode::INTERNAL_SERVER_ERROR,
        };
        if status.is_server_error() {
            error!(error = %self.0, "request failed");
        }
        (status, Json(self.0)).into_response()
    }
}

impl From<ApiError> for Failure {
    fn from(e: ApiError) -> Self {
        Failure(e)
    }
}

type Reply<T> = Result<Json<T>, Failure>;

/// Runs CPU-bound engine work off the async workers so one slow query does
/// not stall the others.
async fn blocking<T, F>(f: F) -> Reply<T>
where
    T: Send + 'static,
    F: FnOnce() -> Result<T, ApiError> + Send + 'static,
{
    match tokio::task::spawn_blocking(f).await {
        Ok(r) => r.map(Json).map_err(Failure),
        Err(e) => Err(Failure(ApiError::internal(e))),
    }
}

async fn health(State(engine): State<Arc<Engine>>) -> Json<api::HealthResponse> {
    Json(api::health(&engine))
}

async fn search(
    State(engine): State<Arc<Engine>>,
    Query(raw): Query<HashMap<String, String>>,
) -> Reply<api::SearchResponse> {
    let params = SearchParams::from_pairs(&raw)?;
    blocking(move || api::search(&engine, &params)).await
}

async fn ask(State(engine): State<Arc<Engine>>, body: Bytes) -> Reply<api::AskResponse> {
    let req: AskRequest = serde_json::from_slice(&body).map_err(|e| ApiError::field("body", e.to_string()))?;
    blocking(move || api::ask(&engine, &req)).await
}

async fn doc(State(engine): State<Arc<Engine>>, Path(id): Path<String>) -> Reply<api::DocResponse> {
    api::doc(&engine, &id).map(Json).map_err(Failure)
}

async fn not_found() -> Failure {
    Failure(ApiError::not_found("no such route"))
}

pub fn router(engine: Arc<Engine>) -> Router {
    Router::new()
        .route("/api/health", get(health))
        .route("/api/search", get(search))
        .route("/api/ask", post(ask))
        .route("/api/doc/{id}", get(doc))
        .fallback(not_found)
        .with_state(engine)
}

/// Binds `addr` and serves in a background task. Returns the bound address
/// (useful with port 0).
pub async fn spawn(
    engine: Arc<Engine>,
    addr: SocketAddr,
) -> std::io::Result<(SocketAddr, JoinHandle<std::io::Result<()>>)> {
    let listener = TcpListener::bind(addr).await?;
    let local = listener.local_addr()?;
    let app = router(engine);
    let handle = tokio::spawn(async move { axum::serve(listener, app).await });
    Ok((local, handle))
}

/// Serves until Ctrl-C.
pub async fn serve(engine: Arc<Engine>, addr: SocketAddr) -> std::io::Result<()> {
    let listener = TcpListener::bind(addr)
        .await
        .map_err(|e| std::io::Error::new(e.kind(), format!("cannot bind {addr}: {e}")))?;
    info!(addr = %listener.local_addr()?, records = engine.records().len(), "listening");
    axum::serve(listener, router(engine))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
            info!("shutting down");
        })
        .await
}
