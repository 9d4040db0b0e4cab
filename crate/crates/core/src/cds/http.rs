use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::Router;
use serde_json::{json, Value};
use tokio::net::TcpListener;

use super::{invoke, Registry};

fn json_response(status: u16, body: &Value) -> Response {
    let status = StatusCode::from_u16(status).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
    let text = serde_json::to_string(body).expect("JSON values serialize");
    (status, [(header::CONTENT_TYPE, "application/json")], text).into_response()
}

async fn discovery(State(registry): State<Arc<Registry>>) -> Response {
    json_response(200, &registry.discovery())
}

async fn health(State(registry): State<Arc<Registry>>) -> Response {
    json_response(200, &json!({ "status": "ok", "services": registry.len() }))
}

async fn hook(State(registry): State<Arc<Registry>>, Path(id): Path<String>, body: Bytes) -> Response {
    let today = chrono::Utc::now().date_naive();
    let (status, value) = invoke(&registry, &id, &body, today);
    log::info!("POST /cds-services/{id} -> {status}");
    json_response(status, &value)
}

pub fn router(registry: Arc<Registry>) -> Router {
    Router::new()
        .route("/cds-services", get(discovery))
        .route("/cds-services/{id}", post(hook))
        .route("/health", get(health))
        .with_state(registry)
}

/// Serves until `shutdown` resolves.
pub async fn serve_on(
    listener: TcpListener,
    registry: Arc<Registry>,
    shutdown: impl std::future::Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    axum::serve(listener, router(registry)).with_graceful_shutdown(shutdown).await
}
