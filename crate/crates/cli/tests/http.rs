use std::sync::Arc;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

use psyseg_cli::server::{router, AppState, QueryView};
use psyseg_core::session::{AnnotatorMode, ImageSource, Participant, QuotaSchedule};
use psyseg_core::{Session, SessionConfig, SyntheticSpec};

fn interactive_config(quota: usize) -> SessionConfig {
    let mut c = SessionConfig::synthetic(Participant::ColorFirst, 5);
    c.image = ImageSource::Synthetic {
        spec: SyntheticSpec { width: 192, height: 192, cell_size: 64, ..SyntheticSpec::desk_scale(5) },
    };
    c.annotator = AnnotatorMode::Interactive;
    c.superpixels = 81;
    c.iterations = 2;
    c.responses_per_iteration = QuotaSchedule::Constant(quota);
    c.training.epochs = 3;
    c
}

struct Harness {
    _dir: tempfile::TempDir,
    app: Router,
    base: String,
}

impl Harness {
    fn new(quota: usize) -> Self {
        let dir = tempfile::tempdir().unwrap();
        let session_dir = dir.path().join("demo");
        let session = Session::init(&session_dir, interactive_config(quota)).unwrap();
        let state = Arc::new(AppState::new(session).unwrap());
        assert_eq!(state.id(), "demo");
        Harness { _dir: dir, app: router(state, None), base: "/api/sessions/demo".into() }
    }

    async fn call(&self, method: &str, path: &str, body: Option<Value>) -> (StatusCode, Vec<u8>) {
        let req = Request::builder().method(method).uri(format!("{}{path}", self.base));
        let req = match body {
            Some(b) => req.header("content-type", "application/json").body(Body::from(b.to_string())),
            None => req.body(Body::empty()),
        }
        .unwrap();
        let resp = self.app.clone().oneshot(req).await.unwrap();
        let status = resp.status();
        (status, resp.into_body().collect().await.unwrap().to_bytes().to_vec())
    }

    async fn json(&self, method: &str, path: &str, body: Option<Value>) -> (StatusCode, Value) {
        let (s, b) = self.call(method, path, body).await;
        (s, if b.is_empty() { Value::Null } else { serde_json::from_slice(&b).unwrap() })
    }

    async fn next(&self) -> Option<QueryView> {
        let (s, b) = self.call("GET", "/queries/next", None).await;
        match s {
            StatusCode::OK => Some(serde_json::from_slice(&b).unwrap()),
            StatusCode::NO_CONTENT => None,
            other => panic!("unexpected {other}"),
        }
    }
}

fn decode_png(b64: &str) -> (u32, u32) {
    let bytes = STANDARD.decode(b64).unwrap();
    assert_eq!(&bytes[1..4], b"PNG");
    let w = u32::from_be_bytes(bytes[16..20].try_into().unwrap());
    let h = u32::from_be_bytes(bytes[20..24].try_into().unwrap());
    (w, h)
}

#[tokio::test]
async fn fresh_session_status_and_query() {
    let h = Harness::new(10);
    let (s, status) = h.json("GET", "", None).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!((status["iteration"].as_u64(), status["answered"].as_u64(), status["quota"].as_u64()), (Some(0), Some(0), Some(10)));
    assert_eq!(status["state"], "collecting");

    let q = h.next().await.unwrap();
    assert_eq!(q.options.len(), 3);
    let ids: Vec<usize> = q.options.iter().map(|o| o.patch_id).collect();
    assert!(ids[0] != ids[1] && ids[1] != ids[2] && ids[0] != ids[2]);
    for o in &q.options {
        let (cw, ch) = decode_png(&o.crop_png_b64);
        let (xw, xh) = decode_png(&o.context_png_b64);
        assert!(xw >= cw && xh >= ch);
    }
}

#[tokio::test]
async fn responses_are_idempotent_and_validated() {
    let h = Harness::new(10);
    let q = h.next().await.unwrap();
    let (s, _) = h.json("POST", "/responses", Some(json!({"query_id": q.query_id, "choice": 1}))).await;
    assert_eq!(s, StatusCode::CREATED);
    let (s, _) = h.json("POST", "/responses", Some(json!({"query_id": q.query_id, "choice": 2}))).await;
    assert_eq!(s, StatusCode::OK);
    let (_, status) = h.json("GET", "", None).await;
    assert_eq!(status["answered"], 1);

    let (s, _) = h.json("POST", "/responses", Some(json!({"query_id": "9-9", "choice": 0}))).await;
    assert_eq!(s, StatusCode::NOT_FOUND);
    let next = h.next().await.unwrap();
    assert_ne!(next.query_id, q.query_id);
    let (s, _) = h.json("POST", "/responses", Some(json!({"query_id": next.query_id, "choice": 3}))).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    let (s, _) = h.json("POST", "/responses", Some(json!({"query_id": next.query_id}))).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    let (s, _) = h.json("POST", "/responses", Some(json!({"query_id": next.query_id, "choice": -1}))).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    let (_, status) = h.json("GET", "", None).await;
    assert_eq!(status["answered"], 1);

    let req = Request::builder().uri("/api/sessions/other").body(Body::empty()).unwrap();
    assert_eq!(h.app.clone().oneshot(req).await.unwrap().status(), StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn iterate_requires_quota_then_publishes_results() {
    let h = Harness::new(10);
    let (s, err) = h.json("POST", "/iterate", None).await;
    assert_eq!(s, StatusCode::CONFLICT);
    assert_eq!(err["error"], "quota not reached: 10 remaining");
    let (s, _) = h.call("GET", "/hierarchy", None).await;
    assert_eq!(s, StatusCode::NOT_FOUND);

    let mut answered = 0;
    while let Some(q) = h.next().await {
        let (s, _) = h.json("POST", "/responses", Some(json!({"query_id": q.query_id, "choice": answered % 3}))).await;
        assert_eq!(s, StatusCode::CREATED);
        answered += 1;
    }
    assert_eq!(answered, 10);
    let (_, status) = h.json("GET", "", None).await;
    assert_eq!((status["answered"].as_u64(), status["state"].as_str()), (Some(10), Some("ready")));

    let (s, summary) = h.json("POST", "/iterate", None).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(summary["iteration"], 0);
    assert_eq!(summary["answered"], 10);
    let (_, status) = h.json("GET", "", None).await;
    assert_eq!((status["iteration"].as_u64(), status["answered"].as_u64()), (Some(1), Some(0)));

    let (s, tree) = h.json("GET", "/hierarchy", None).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(tree["level"], 0);
    let (s, png) = h.call("GET", "/segmentation/0.png", None).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(&png[1..4], b"PNG");
    let (s, _) = h.call("GET", "/segmentation/99.png", None).await;
    assert_eq!(s, StatusCode::NOT_FOUND);
    let (s, _) = h.call("GET", "/segmentation/zero.png", None).await;
    assert_eq!(s, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn root_serves_a_page() {
    let h = Harness::new(10);
    let req = Request::builder().uri("/").body(Body::empty()).unwrap();
    let resp = h.app.clone().oneshot(req).await.unwrap();
    assert_eq!(resp.status(), StatusCode::OK);
}

#[test]
fn oracle_sessions_are_not_served() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = interactive_config(10);
    c.annotator = AnnotatorMode::Oracle { error_rate: 0.0 };
    let s = Session::init(dir.path(), c).unwrap();
    assert!(AppState::new(s).is_err());
}
