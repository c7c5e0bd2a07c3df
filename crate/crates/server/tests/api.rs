use std::path::{Path, PathBuf};
use std::sync::{Arc, Condvar, Mutex};
use std::time::Duration;

use attributor_core::corpus::Corpus;
use attributor_core::service::{AttributionConfig, AttributionService, GradientProvider, ProviderRequest};
use attributor_core::toy::scenario::{disaster, Scenario};
use attributor_core::toy::{init_workspace, ToyProvider, TrainConfig, MODEL_DIR};
use attributor_server::{router, AppState, ServerOptions, SCHEMA_HEADER};
use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

fn workspace(dir: &Path) -> Scenario {
    let s = disaster(0);
    init_workspace(dir, &s.corpus, s.vocabulary(), TrainConfig::default(), AttributionConfig::default()).unwrap();
    s
}

fn app_for(service: AttributionService) -> Router {
    router(AppState::new(service, 2), &ServerOptions::default())
}

async fn call(app: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let req = Request::builder()
        .method(method)
        .uri(uri)
        .header("content-type", "application/json")
        .body(body.map_or(Body::empty(), |b| Body::from(b.to_string())))
        .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    assert_eq!(resp.headers()[SCHEMA_HEADER], "1");
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    let value = if bytes.is_empty() { Value::Null } else { serde_json::from_slice(&bytes).unwrap_or(Value::Null) };
    if !status.is_success() {
        assert_eq!(value["status"], status.as_u16(), "{value}");
        assert!(value["code"].is_string() && value["message"].is_string(), "{value}");
    }
    (status, value)
}

#[tokio::test]
async fn session_and_attribution_endpoints() {
    let dir = tempfile::tempdir().unwrap();
    let s = workspace(dir.path());
    let app = app_for(AttributionService::open(dir.path()).unwrap());

    let (st, v) = call(&app, "GET", "/api/status", None).await;
    assert_eq!(st, StatusCode::OK);
    assert_eq!(v, json!({"preprocess": {"state": "idle", "done_pairs": 0, "total_pairs": 0}}));

    let (st, v) = call(&app, "POST", "/api/sessions", Some(json!({"prompt": "q", "generated_text": "An IPO is"}))).await;
    assert_eq!(st, StatusCode::CREATED);
    assert_eq!(v["tokens"], json!([{"index": 0, "token": "An"}, {"index": 1, "token": "IPO"}, {"index": 2, "token": "is"}]));
    let small_id = v["session_id"].as_str().unwrap().to_string();
    let (st, v2) = call(&app, "GET", &format!("/api/sessions/{small_id}/tokens"), None).await;
    assert_eq!(st, StatusCode::OK);
    assert_eq!(v2["tokens"], v["tokens"]);

    let (st, v) = call(&app, "POST", "/api/sessions", Some(json!({"prompt": "q", "generated_text": ""}))).await;
    assert_eq!((st, v["code"].as_str()), (StatusCode::BAD_REQUEST, Some("bad_request")));
    let (st, _) = call(&app, "POST", "/api/sessions", Some(json!({"prompt": "q", "generated_txt": "x"}))).await;
    assert_eq!(st, StatusCode::BAD_REQUEST);

    let (_, v) = call(&app, "POST", "/api/sessions", Some(json!({"prompt": s.prompt, "generated_text": s.generated}))).await;
    let id = v["session_id"].as_str().unwrap().to_string();
    let uri = format!("/api/sessions/{id}/attribute");
    let (st, a) = call(&app, "POST", &uri, Some(json!({}))).await;
    assert_eq!(st, StatusCode::OK);
    assert_eq!(a["positive"].as_array().unwrap().len(), 2);
    assert_eq!(a["negative"].as_array().unwrap().len(), 2);
    assert_eq!(a["positive_keywords"].as_array().unwrap().len(), 10);
    assert_eq!(a["negative_keywords"].as_array().unwrap().len(), 10);
    assert!(a["scores"][0].is_f64());
    let (_, again) = call(&app, "POST", &uri, Some(json!({}))).await;
    assert_eq!(a, again);
    let (_, ten) = call(&app, "POST", &uri, Some(json!({"k_display": 10}))).await;
    assert_eq!(ten["positive"].as_array().unwrap().len(), 10);

    let (st, v) = call(&app, "POST", &uri, Some(json!({"token_indices": [500]}))).await;
    assert_eq!((st, v["code"].as_str()), (StatusCode::BAD_REQUEST, Some("bad_request")));
    let (st, v) = call(&app, "POST", "/api/sessions/s0999/attribute", Some(json!({}))).await;
    assert_eq!((st, v["code"].as_str()), (StatusCode::NOT_FOUND, Some("not_found")));

    let cmp_uri = format!("/api/sessions/{id}/compare");
    let (st, c) = call(&app, "POST", &cmp_uri, Some(json!({"edited_text": s.edited}))).await;
    assert_eq!(st, StatusCode::OK);
    assert_eq!(c["generated"]["side"], "generated");
    assert_eq!(c["edited"]["side"], "edited");
    assert_eq!(c["generated"]["histogram"]["bin_edges"], c["shared_bin_edges"]);
    assert_eq!(c["edited"]["histogram"]["bin_edges"], c["shared_bin_edges"]);
    let (st, _) = call(&app, "POST", &cmp_uri, Some(json!({"edited_text": s.generated}))).await;
    assert_eq!(st, StatusCode::BAD_REQUEST);
    let (st, c) = call(
        &app,
        "POST",
        &cmp_uri,
        Some(json!({"edited_text": s.generated, "indices_generated": [1, 2], "indices_edited": [1, 2]})),
    )
    .await;
    assert_eq!(st, StatusCode::OK);
    assert_eq!(c["generated"]["scores"], c["edited"]["scores"]);

    let (st, d) = call(&app, "GET", &format!("/api/datapoints/{}", s.planted_id), None).await;
    assert_eq!(st, StatusCode::OK);
    assert_eq!(d["text"], s.corpus.get(s.planted_id).unwrap().text.as_str());
    assert_eq!(d["metadata"]["source"], "https://x.example.com/post/1388");
    let (st, _) = call(&app, "GET", &format!("/api/datapoints/{}", s.corpus.len()), None).await;
    assert_eq!(st, StatusCode::NOT_FOUND);
    let (st, _) = call(&app, "GET", "/api/datapoints/abc", None).await;
    assert_eq!(st, StatusCode::NOT_FOUND);
    let (st, _) = call(&app, "GET", "/api/nothing", None).await;
    assert_eq!(st, StatusCode::NOT_FOUND);
    let (st, _) = call(&app, "GET", "/api/sessions", None).await;
    assert_eq!(st, StatusCode::METHOD_NOT_ALLOWED);

    let (st, v) = call(&app, "GET", "/api/status", None).await;
    assert_eq!(st, StatusCode::OK);
    assert_eq!(v["preprocess"]["total_pairs"], 3 * s.corpus.len());
}

#[tokio::test]
async fn restarting_reproduces_responses() {
    let dir = tempfile::tempdir().unwrap();
    let s = workspace(dir.path());
    let app = app_for(AttributionService::open(dir.path()).unwrap());
    let (_, v) = call(&app, "POST", "/api/sessions", Some(json!({"prompt": s.prompt, "generated_text": s.generated}))).await;
    let uri = format!("/api/sessions/{}/attribute", v["session_id"].as_str().unwrap());
    let (_, first) = call(&app, "POST", &uri, Some(json!({"token_indices": [7, 8]}))).await;
    let restarted = app_for(AttributionService::open(dir.path()).unwrap());
    let (_, second) = call(&restarted, "POST", &uri, Some(json!({"token_indices": [7, 8]}))).await;
    assert_eq!(first, second);
}

#[tokio::test]
async fn distinct_sessions_attribute_concurrently() {
    let dir = tempfile::tempdir().unwrap();
    let s = workspace(dir.path());
    let service = AttributionService::open(dir.path()).unwrap();
    service.preprocess(false).unwrap();
    let app = app_for(service);
    let mut uris = Vec::new();
    for text in [&s.generated, s.edited.as_ref().unwrap()] {
        let (_, v) = call(&app, "POST", "/api/sessions", Some(json!({"prompt": s.prompt, "generated_text": text}))).await;
        uris.push(format!("/api/sessions/{}/attribute", v["session_id"].as_str().unwrap()));
    }
    let (a, b) = tokio::join!(
        call(&app, "POST", &uris[0], Some(json!({}))),
        call(&app, "POST", &uris[1], Some(json!({}))),
    );
    assert_eq!((a.0, b.0), (StatusCode::OK, StatusCode::OK));
}

/// Toy provider whose train calls block until the gate opens.
struct Gated {
    inner: ToyProvider,
    gate: Arc<(Mutex<bool>, Condvar)>,
}

impl GradientProvider for Gated {
    fn gradient(&self, request: &ProviderRequest) -> attributor_core::Result<PathBuf> {
        if matches!(request, ProviderRequest::Train { .. }) {
            let (lock, cv) = &*self.gate;
            let mut open = lock.lock().unwrap();
            while !*open {
                open = cv.wait(open).unwrap();
            }
        }
        self.inner.gradient(request)
    }
}

#[tokio::test]
async fn second_preprocess_conflicts_while_running() {
    let dir = tempfile::tempdir().unwrap();
    workspace(dir.path());
    let config = attributor_core::service::WorkspaceConfig::load(dir.path()).unwrap();
    let corpus = Corpus::load(&dir.path().join(&config.corpus)).unwrap();
    let gate = Arc::new((Mutex::new(false), Condvar::new()));
    let provider = Gated {
        inner: ToyProvider::load(&dir.path().join(MODEL_DIR), &corpus).unwrap(),
        gate: Arc::clone(&gate),
    };
    let service = AttributionService::with_provider(dir.path(), config, Arc::new(provider)).unwrap();
    let app = app_for(service);
    let (_, v) = call(&app, "POST", "/api/sessions", Some(json!({"prompt": "p", "generated_text": "the fire"}))).await;
    let attribute_uri = format!("/api/sessions/{}/attribute", v["session_id"].as_str().unwrap());

    let (st, v) = call(&app, "POST", "/api/preprocess", None).await;
    assert_eq!(st, StatusCode::ACCEPTED);
    assert_eq!(v["preprocess"]["state"], "running");
    let (st, v) = call(&app, "POST", "/api/preprocess", Some(json!({"force": false}))).await;
    assert_eq!((st, v["code"].as_str()), (StatusCode::CONFLICT, Some("busy")));
    let (st, _) = call(&app, "POST", &attribute_uri, Some(json!({}))).await;
    assert_eq!(st, StatusCode::CONFLICT);

    {
        let (lock, cv) = &*gate;
        *lock.lock().unwrap() = true;
        cv.notify_all();
    }
    for _ in 0..600 {
        let (_, v) = call(&app, "GET", "/api/status", None).await;
        if v["preprocess"]["state"] == "idle" && v["preprocess"]["done_pairs"] == v["preprocess"]["total_pairs"] {
            let (st, _) = call(&app, "POST", &attribute_uri, Some(json!({}))).await;
            assert_eq!(st, StatusCode::OK);
            return;
        }
        tokio::time::sleep(Duration::from_millis(50)).await;
    }
    panic!("preprocess did not finish");
}

#[tokio::test]
async fn failed_preprocess_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    workspace(dir.path());
    let mut config = attributor_core::service::WorkspaceConfig::load(dir.path()).unwrap();
    config.provider = attributor_core::service::ProviderSpec::Command { argv: vec!["false".into()] };
    let service = AttributionService::with_config(dir.path(), config).unwrap();
    let app = app_for(service);
    let (st, _) = call(&app, "POST", "/api/preprocess", None).await;
    assert_eq!(st, StatusCode::ACCEPTED);
    for _ in 0..200 {
        let (_, v) = call(&app, "GET", "/api/status", None).await;
        if v["preprocess"]["state"] == "failed" {
            assert!(v["preprocess"]["message"].as_str().unwrap().contains("checkpoint 0 example 0"));
            return;
        }
        tokio::time::sleep(Duration::from_millis(25)).await;
    }
    panic!("failure was not reported");
}

#[tokio::test]
async fn placeholder_index_is_served() {
    let dir = tempfile::tempdir().unwrap();
    workspace(dir.path());
    let app = app_for(AttributionService::open(dir.path()).unwrap());
    let resp = app
        .oneshot(Request::builder().uri("/").body(Body::empty()).unwrap())
        .await
        .unwrap();
    assert_eq!(resp.status(), StatusCode::OK);
    let html = resp.into_body().collect().await.unwrap().to_bytes();
    assert!(std::str::from_utf8(&html).unwrap().contains("/api"));
}
