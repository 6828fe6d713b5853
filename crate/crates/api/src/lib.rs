//! HTTP/JSON service over a loaded [`Dataset`].
//!
//! All endpoints are `GET`. Errors carry `{code, message}` bodies. The JSON
//! schema for each response is served under `/docs/schemas`.

mod error;
mod handlers;
mod params;
mod schemas;

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use axum::routing::get;
use axum::Router;
use heatlens_core::diagnostics::Dataset;
use tower_http::services::{ServeDir, ServeFile};

pub use error::{ApiError, ErrorBody};
pub use schemas::{schema, SCHEMAS};

/// Largest `bins` accepted by `/api/histogram`.
pub const MAX_BINS: usize = 10_000;

#[derive(Debug, thiserror::Error)]
pub enum ServeError {
    #[error("cannot bind {addr}")]
    Bind {
        addr: SocketAddr,
        #[source]
        source: std::io::Error,
    },
    #[error("server error")]
    Serve(#[source] std::io::Error),
}

/// Builds the router. `assets` is a directory holding a built dashboard;
/// without one `/` serves a small index of the endpoints.
pub fn router(dataset: Arc<Dataset>, assets: Option<PathBuf>) -> Router {
    let api = Router::new()
        .route("/summary", get(handlers::summary))
        .route("/columns", get(handlers::columns))
        .route("/kpi", get(handlers::kpi))
        .route("/boxplot", get(handlers::boxplot))
        .route("/histogram", get(handlers::histogram))
        .route("/heatmap/missing", get(handlers::heatmap_missing))
        .route("/heatmap/meters", get(handlers::heatmap_meters))
        .route("/timestamps/missing", get(handlers::timestamps_missing))
        .route("/violations", get(handlers::violations))
        .route("/correlation", get(handlers::correlation))
        .route("/scatter", get(handlers::scatter))
        .route("/timeseries", get(handlers::timeseries))
        .route("/meters", get(handlers::meters))
        .route("/meters/export", get(handlers::meters_export))
        .fallback(handlers::not_found)
        .with_state(dataset);
    let docs = Router::new()
        .route("/schemas", get(handlers::schema_index))
        .route("/schemas/{name}", get(handlers::schema_file))
        .fallback(handlers::not_found);
    let app = Router::new().nest("/api", api).nest("/docs", docs);
    match assets {
        Some(dir) => {
            let index = dir.join("index.html");
            app.fallback_service(ServeDir::new(dir).fallback(ServeFile::new(index)))
        }
        None => app
            .route("/", get(handlers::index))
            .fallback(handlers::not_found),
    }
}

pub async fn bind(addr: SocketAddr) -> Result<tokio::net::TcpListener, ServeError> {
    tokio::net::TcpListener::bind(addr)
        .await
        .map_err(|source| ServeError::Bind { addr, source })
}

/// Serves on `listener` until the process is stopped.
pub async fn serve_on(
    listener: tokio::net::TcpListener,
    dataset: Arc<Dataset>,
    assets: Option<PathBuf>,
) -> Result<(), ServeError> {
    axum::serve(listener, router(dataset, assets))
        .await
        .map_err(ServeError::Serve)
}

/// Binds `addr` and serves until the process is stopped.
pub async fn serve(
    dataset: Arc<Dataset>,
    addr: SocketAddr,
    assets: Option<PathBuf>,
) -> Result<(), ServeError> {
    serve_on(bind(addr).await?, dataset, assets).await
}
