//! Stateless JSON-over-HTTP facade over the graph actions.

use std::net::SocketAddr;
use std::path::PathBuf;

use axum::body::Bytes;
use axum::extract::Path;
use axum::http::{header, Method, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde_json::{json, Value};
use tower_http::cors::{Any, CorsLayer};
use tower_http::services::ServeDir;

use crate::api::{self, Action, ApiRequest};

fn reply(status: StatusCode, body: Value) -> Response {
    (status, Json(body)).into_response()
}

fn client_error(code: &str, message: String, location: Option<Value>) -> Response {
    let mut err = json!({ "code": code, "message": message });
    if let Some(loc) = location {
        err["location"] = loc;
    }
    reply(StatusCode::BAD_REQUEST, json!({ "ok": false, "error": err }))
}

async fn health() -> Json<Value> {
    Json(json!({ "ok": true }))
}

async fn dispatch(path_action: Option<Action>, body: Bytes) -> Response {
    let req: ApiRequest = match serde_json::from_slice(&body) {
        Ok(r) => r,
        Err(e) => {
            let loc = (e.line() > 0).then(|| json!({ "line": e.line(), "column": e.column() }));
            return client_error("malformed_json", e.to_string(), loc);
        }
    };
    let action = match (path_action, req.action) {
        (Some(p), Some(b)) if p != b => {
            return client_error("action_mismatch", format!("body action `{b}` does not match path `{p}`"), None)
        }
        (Some(a), _) | (None, Some(a)) => a,
        (None, None) => return client_error("missing_action", "request names no action".into(), None),
    };
    // Exhaustive VAS search can take a while; keep it off the async workers.
    let out = tokio::task::spawn_blocking(move || api::run(action, req.graph.as_ref(), &req.params)).await;
    match out {
        Ok(Ok(result)) => reply(StatusCode::OK, json!({ "ok": true, "result": result })),
        Ok(Err(e)) => reply(StatusCode::UNPROCESSABLE_ENTITY, api::error_body(&e)),
        Err(e) => reply(
            StatusCode::INTERNAL_SERVER_ERROR,
            json!({ "ok": false, "error": { "code": "internal", "message": e.to_string() } }),
        ),
    }
}

async fn by_path(Path(name): Path<String>, body: Bytes) -> Response {
    match name.parse::<Action>() {
        Ok(a) => dispatch(Some(a), body).await,
        Err(e) => reply(StatusCode::NOT_FOUND, api::error_body(&e)),
    }
}

async fn by_body(body: Bytes) -> Response {
    dispatch(None, body).await
}

/// Routes under `/api`, with CORS and an optional static UI directory.
pub fn router(static_dir: Option<PathBuf>) -> Router {
    let cors = CorsLayer::new()
        .allow_origin(Any)
        .allow_methods([Method::GET, Method::POST, Method::OPTIONS])
        .allow_headers([header::CONTENT_TYPE]);
    let app = Router::new()
        .route("/api/health", get(health))
        .route("/api", post(by_body))
        .route("/api/:action", post(by_path));
    let app = match static_dir {
        Some(dir) => app.fallback_service(ServeDir::new(dir)),
        None => app,
    };
    app.layer(cors)
}

pub async fn serve(addr: SocketAddr, static_dir: Option<PathBuf>) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    axum::serve(listener, router(static_dir)).await
}
