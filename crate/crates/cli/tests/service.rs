mod common;

use std::fs;

use axum::body::{to_bytes, Body};
use axum::http::{Request, StatusCode};
use axum::Router;
use common::fixture;
use dswig_cli::service::router;
use serde_json::{json, Value};
use tower::ServiceExt;

async fn call(app: &Router, req: Request<Body>) -> (StatusCode, Value, String) {
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = to_bytes(resp.into_body(), usize::MAX).await.unwrap();
    let text = String::from_utf8(bytes.to_vec()).unwrap();
    let v = serde_json::from_str(&text).unwrap_or(Value::Null);
    (status, v, text)
}

fn post(path: &str, body: impl Into<String>) -> Request<Body> {
    Request::post(path).header("content-type", "application/json").body(Body::from(body.into())).unwrap()
}

fn fig3b() -> String {
    fs::read_to_string(fixture("documents/fig3b.dswig")).unwrap()
}

#[tokio::test]
async fn health() {
    let app = router(None);
    let (s, v, _) = call(&app, Request::get("/api/health").body(Body::empty()).unwrap()).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v, json!({"ok": true}));
}

#[tokio::test]
async fn dsep_example() {
    let app = router(None);
    let body = json!({"graph": fig3b(), "params": {"x": ["dY1"], "y": ["D"], "z": ["X"]}});
    let (s, v, _) = call(&app, post("/api/dsep", body.to_string())).await;
    assert_eq!(s, StatusCode::OK, "{v}");
    assert_eq!(v, json!({"ok": true, "result": {"separated": true}}));
}

#[tokio::test]
async fn vas_example_with_feedback() {
    let app = router(None);
    let body = json!({"params": {"T": 3, "g": 1, "t": 2, "restrict": "r-alpha,r-y,r-dx-t"}});
    let (s, v, _) = call(&app, post("/api/vas", body.to_string())).await;
    assert_eq!(s, StatusCode::OK, "{v}");
    assert_eq!(v["result"]["feasible"], json!(false));
    assert_eq!(v["result"]["minimal_potential"], json!(["X0", "X1", "X2(0)"]));
}

#[tokio::test]
async fn action_in_body() {
    let app = router(None);
    let (s, v, _) = call(&app, post("/api", json!({"action": "table1", "params": {"T": 3}}).to_string())).await;
    assert_eq!(s, StatusCode::OK, "{v}");
    assert_eq!(v["result"]["rows"].as_array().unwrap().len(), 8);
    let (s, v, _) = call(&app, post("/api/swig", json!({"action": "table1", "params": {"T": 3}}).to_string())).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    assert_eq!(v["error"]["code"], "action_mismatch");
}

#[tokio::test]
async fn malformed_json_is_400_with_location() {
    let app = router(None);
    let (s, v, _) = call(&app, post("/api/dsep", "{\n  \"graph\": \"node A\",\n  oops\n}")).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    assert_eq!(v["ok"], false);
    assert_eq!(v["error"]["code"], "malformed_json");
    assert_eq!(v["error"]["location"]["line"], 3);
    assert!(v["error"]["location"]["column"].as_u64().unwrap() > 0);
}

#[tokio::test]
async fn domain_errors_mirror_the_cli() {
    let app = router(None);
    let body = json!({"graph": "node A\nedge A -> B\nedge B -> A\n", "params": {}});
    let (s, v, _) = call(&app, post("/api/parse", body.to_string())).await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(v["ok"], false);
    assert!(v["error"]["code"].is_string());

    let body = json!({"graph": "node A\nedge A => B\n"});
    let (s, v, _) = call(&app, post("/api/parse", body.to_string())).await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(v["error"]["code"], "syntax");
    assert_eq!(v["error"]["location"]["line"], 2);

    let (s, v, _) = call(&app, post("/api/nope", "{}")).await;
    assert_eq!(s, StatusCode::NOT_FOUND);
    assert_eq!(v["ok"], false);

    let (s, v, _) = call(&app, post("/api/table1", json!({"params": {"T": 4, "extra": 1}}).to_string())).await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(v["error"]["code"], "config");
}

#[tokio::test]
async fn every_action_answers() {
    let app = router(None);
    let g = fig3b();
    let cases = [
        ("parse", json!({"graph": g})),
        ("swig", json!({"graph": g})),
        ("delta", json!({"graph": g})),
        ("dsep", json!({"graph": g, "params": {"query": "dY1 _||_ D | X"}})),
        ("vas", json!({"params": {"T": 4, "g": 2, "t": 3, "restrict": "r-alpha,r-y,r-dx-t,r-dx-t1"}})),
        ("table1", json!({"params": {"T": 5}})),
        ("template", json!({"params": {"T": 3, "restrict": "r-alpha,r-y"}})),
    ];
    for (action, body) in cases {
        let (s, v, _) = call(&app, post(&format!("/api/{action}"), body.to_string())).await;
        assert_eq!(s, StatusCode::OK, "{action}: {v}");
        assert_eq!(v["ok"], true, "{action}");
    }
}

#[tokio::test]
async fn json_graph_round_trip() {
    let app = router(None);
    let (_, parsed, _) = call(&app, post("/api/parse", json!({"graph": fig3b()}).to_string())).await;
    let body = json!({
        "graph": parsed["result"]["graph"],
        "params": {"query": "dY1 _||_ D | X", "pipeline": parsed["result"]["pipeline"]},
    });
    let (s, v, _) = call(&app, post("/api/dsep", body.to_string())).await;
    assert_eq!(s, StatusCode::OK, "{v}");
    assert_eq!(v["result"]["separated"], true);
}

#[tokio::test]
async fn cors_preflight() {
    let app = router(None);
    let req = Request::builder()
        .method("OPTIONS")
        .uri("/api/dsep")
        .header("origin", "http://localhost:5173")
        .header("access-control-request-method", "POST")
        .header("access-control-request-headers", "content-type")
        .body(Body::empty())
        .unwrap();
    let resp = app.oneshot(req).await.unwrap();
    assert!(resp.status().is_success());
    assert_eq!(resp.headers()["access-control-allow-origin"], "*");
}

#[tokio::test]
async fn concurrent_identical_requests_agree() {
    let app = router(None);
    let body = json!({"graph": fig3b(), "params": {"query": "dY1 _||_ D | X"}}).to_string();
    let handles: Vec<_> = (0..16)
        .map(|_| {
            let app = app.clone();
            let body = body.clone();
            tokio::spawn(async move { call(&app, post("/api/delta", body)).await.2 })
        })
        .collect();
    let mut bodies = Vec::new();
    for h in handles {
        bodies.push(h.await.unwrap());
    }
    assert!(bodies.windows(2).all(|w| w[0] == w[1]));
}

#[tokio::test]
async fn serves_static_files() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("index.html"), "<html>ui</html>").unwrap();
    let app = router(Some(dir.path().to_path_buf()));
    let resp = app.clone().oneshot(Request::get("/index.html").body(Body::empty()).unwrap()).await.unwrap();
    assert_eq!(resp.status(), StatusCode::OK);
    let (s, _, _) = call(&app, Request::get("/api/health").body(Body::empty()).unwrap()).await;
    assert_eq!(s, StatusCode::OK);
}
