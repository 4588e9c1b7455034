use std::sync::Arc;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use erms_core::session::{EventLog, ScenarioCatalog};
use erms_core::*;
use erms_service::{router, AppState};
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

async fn call(app: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    call_with(app, method, uri, body, None).await
}

async fn call_with(
    app: &Router,
    method: &str,
    uri: &str,
    body: Option<Value>,
    if_match: Option<&str>,
) -> (StatusCode, Value) {
    let mut req = Request::builder().method(method).uri(uri);
    if let Some(tag) = if_match {
        req = req.header("if-match", tag);
    }
    let req = match body {
        Some(b) => req
            .header("content-type", "application/json")
            .body(Body::from(b.to_string())),
        None => req.body(Body::empty()),
    }
    .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    let value = if bytes.is_empty() {
        Value::Null
    } else {
        serde_json::from_slice(&bytes).unwrap_or_else(|_| Value::String(String::from_utf8_lossy(&bytes).into()))
    };
    (status, value)
}

fn app() -> Router {
    router(Arc::new(AppState::in_memory()))
}

async fn new_session(app: &Router, scenario: &str) -> String {
    let (status, body) = call(app, "POST", "/sessions", Some(json!({ "scenario_id": scenario }))).await;
    assert_eq!(status, StatusCode::CREATED, "{body}");
    body["session"]["id"].as_str().unwrap().to_owned()
}

fn probs(v: &Value) -> Vec<f64> {
    v["probs"].as_array().unwrap().iter().map(|p| p.as_f64().unwrap()).collect()
}

#[tokio::test]
async fn fresh_session_diagnosis_is_prior() {
    let app = app();
    let id = new_session(&app, "gas-compressor").await;
    assert_eq!(id, "s1");
    let (status, d) = call(&app, "GET", &format!("/sessions/{id}/diagnosis"), None).await;
    assert_eq!(status, StatusCode::OK);
    let bundle = builtin_gas_compressor();
    let prior = aggregate(&posterior(&bundle.network, &Evidence::new(), "leak_state").unwrap(), &bundle.aggregation).unwrap();
    assert_eq!(probs(&d["aggregate"]), prior.probs());
    assert_eq!(d["severity"], "intermediate");
    assert_eq!(d["response"], "Normative decision system");
    assert_eq!(new_session(&app, "desk-alarm").await, "s2");
}

#[tokio::test]
async fn observation_then_recommendation_matches_library() {
    let app = app();
    let id = new_session(&app, "gas-compressor").await;
    let (status, body) = call(
        &app,
        "POST",
        &format!("/sessions/{id}/observations"),
        Some(json!({ "node": "ld_a", "outcome": "alarm" })),
    )
    .await;
    assert_eq!(status, StatusCode::OK, "{body}");
    assert_eq!(body["event"]["seq"], 2);
    assert_eq!(body["event"]["kind"], "observation");

    let (_, rec) = call(&app, "GET", &format!("/sessions/{id}/recommendation"), None).await;
    let bundle = builtin_gas_compressor();
    let ev = Evidence::new().with("ld_a", "alarm");
    let d = aggregate(&posterior(&bundle.network, &ev, "leak_state").unwrap(), &bundle.aggregation).unwrap();
    let direct = escalating_recommend(&d, 0.0, 0, &bundle).unwrap();
    assert_eq!(rec, serde_json::to_value(&direct).unwrap());
}

#[tokio::test]
async fn desk_alarm_posterior_via_api() {
    let app = app();
    let id = new_session(&app, "desk-alarm").await;
    call(&app, "POST", &format!("/sessions/{id}/observations"), Some(json!({ "node": "alarm", "outcome": "alarm" }))).await;
    let (_, d) = call(&app, "GET", &format!("/sessions/{id}/diagnosis"), None).await;
    let p = probs(&d["aggregate"]);
    for (a, e) in p.iter().zip([0.375, 0.4667, 0.1583]) {
        assert!((a - e).abs() < 1e-4, "{p:?}");
    }
}

#[tokio::test]
async fn plan_budget_one_is_myopic_library_plan() {
    let app = app();
    let id = new_session(&app, "gas-compressor").await;
    let bundle = builtin_gas_compressor();
    let constraints = FramingConstraints {
        expansion_budget: 1,
        ..bundle.constraints_default.clone()
    };
    let (status, plan) = call(
        &app,
        "POST",
        &format!("/sessions/{id}/plan"),
        Some(json!({ "constraints": constraints, "heuristic": "highest-ev-path" })),
    )
    .await;
    assert_eq!(status, StatusCode::OK, "{plan}");
    let d = DiscreteDistribution::new(["none", "progressive", "catastrophic"], vec![0.90, 0.08, 0.02]).unwrap();
    let prior = aggregate(&posterior(&bundle.network, &Evidence::new(), "leak_state").unwrap(), &bundle.aggregation).unwrap();
    assert!(prior.max_abs_diff(&d).unwrap() < 1e-12);
    let direct = build_plan(&bundle, &prior, 0, &constraints, Heuristic::HighestEvPath).unwrap();
    assert_eq!(plan, serde_json::to_value(&direct).unwrap());
    assert_eq!(plan["expansions_used"], 1);

    // Seed override and default constraints.
    let (status, seeded) = call(
        &app,
        "POST",
        &format!("/sessions/{id}/plan"),
        Some(json!({ "heuristic": "probability-weighted", "seed": 99 })),
    )
    .await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(seeded["constraints"]["seed"], 99);
    let (status, _) = call(&app, "POST", &format!("/sessions/{id}/plan"), None).await;
    assert_eq!(status, StatusCode::OK);
}

#[tokio::test]
async fn every_mutation_appends_one_event() {
    let app = app();
    let id = new_session(&app, "gas-compressor").await;
    let steps = [
        ("observations", Some(json!({ "node": "pd_a", "outcome": "low" }))),
        ("advance", Some(json!({ "dt": 12.5 }))),
        ("test-results", Some(json!({ "test_id": "gas_sniffer_survey", "outcome": "gas_detected" }))),
        ("level", Some(json!({ "level": "partial" }))),
        ("level", Some(json!({ "level": 2 }))),
        ("ignition", None),
    ];
    for (n, (path, body)) in steps.into_iter().enumerate() {
        let (status, resp) = call(&app, "POST", &format!("/sessions/{id}/{path}"), body).await;
        assert_eq!(status, StatusCode::OK, "{path}: {resp}");
        assert_eq!(resp["session"]["seq"], n as u64 + 2);
        assert_eq!(resp["session"]["events"], n as u64 + 2);
    }
    let (_, s) = call(&app, "GET", &format!("/sessions/{id}"), None).await;
    assert_eq!(s["clock"], 12.5);
    assert_eq!(s["status_quo_level_name"], "full-process");
    assert_eq!(s["severity"], "high");
    assert_eq!(s["response"], "Emergency shutdown");

    let (_, profile) = call(&app, "GET", &format!("/sessions/{id}/profile"), None).await;
    let points = profile["points"].as_array().unwrap();
    assert_eq!(points.len(), 7);
    assert_eq!(points[6]["ignition_prob"], 1.0);
    assert_eq!(points[6]["severity"], "high");

    let (_, rec) = call(&app, "GET", &format!("/sessions/{id}/recommendation"), None).await;
    assert_eq!(rec["forced"], true);
    assert_eq!(rec["chosen_name"], "esd");
    let (status, _) = call(&app, "POST", &format!("/sessions/{id}/plan"), None).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn error_statuses() {
    let app = app();
    let id = new_session(&app, "gas-compressor").await;
    let cases = [
        ("POST", "/sessions".to_owned(), Some(json!({ "scenario_id": "nope" })), StatusCode::BAD_REQUEST),
        ("POST", "/sessions".to_owned(), Some(json!({ "wrong": 1 })), StatusCode::BAD_REQUEST),
        ("GET", "/sessions/s404".to_owned(), None, StatusCode::NOT_FOUND),
        ("GET", "/sessions/s404/diagnosis".to_owned(), None, StatusCode::NOT_FOUND),
        ("POST", "/sessions/s404/advance".to_owned(), Some(json!({ "dt": 1.0 })), StatusCode::NOT_FOUND),
        ("POST", format!("/sessions/{id}/observations"), Some(json!({ "node": "ghost", "outcome": "x" })), StatusCode::BAD_REQUEST),
        ("POST", format!("/sessions/{id}/observations"), Some(json!({ "node": "leak_state", "outcome": "no-leak" })), StatusCode::BAD_REQUEST),
        ("POST", format!("/sessions/{id}/test-results"), Some(json!({ "test_id": "ghost", "outcome": "x" })), StatusCode::BAD_REQUEST),
        ("POST", format!("/sessions/{id}/advance"), Some(json!({ "dt": -2.0 })), StatusCode::BAD_REQUEST),
        ("POST", format!("/sessions/{id}/level"), Some(json!({ "level": 17 })), StatusCode::BAD_REQUEST),
        ("POST", format!("/sessions/{id}/level"), Some(json!({ "level": "halfway" })), StatusCode::BAD_REQUEST),
        ("POST", format!("/sessions/{id}/plan"), Some(json!({ "heuristic": "random" })), StatusCode::BAD_REQUEST),
        ("POST", format!("/sessions/{id}/plan"), Some(json!({ "constraints": { "max_tests": 1, "max_total_time": 10.0, "max_total_cost": 1.0, "expansion_budget": 0 } })), StatusCode::BAD_REQUEST),
    ];
    for (method, uri, body, expected) in cases {
        let (status, resp) = call(&app, method, &uri, body.clone()).await;
        assert_eq!(status, expected, "{method} {uri} {body:?}: {resp}");
        assert!(resp["error"].is_string(), "{resp}");
    }
    // Nothing above touched the session.
    let (_, s) = call(&app, "GET", &format!("/sessions/{id}"), None).await;
    assert_eq!(s["seq"], 1);
}

#[tokio::test]
async fn stale_seq_is_a_conflict() {
    let app = app();
    let id = new_session(&app, "gas-compressor").await;
    let uri = format!("/sessions/{id}/advance");
    let (status, _) = call(&app, "POST", &uri, Some(json!({ "dt": 1.0, "expected_seq": 1 }))).await;
    assert_eq!(status, StatusCode::OK);
    let (status, body) = call(&app, "POST", &uri, Some(json!({ "dt": 1.0, "expected_seq": 1 }))).await;
    assert_eq!(status, StatusCode::CONFLICT, "{body}");
    let (status, _) = call_with(&app, "POST", &uri, Some(json!({ "dt": 1.0 })), Some("\"1\"")).await;
    assert_eq!(status, StatusCode::CONFLICT);
    let (status, _) = call_with(&app, "POST", &uri, Some(json!({ "dt": 1.0 })), Some("\"2\"")).await;
    assert_eq!(status, StatusCode::OK);
    let (status, _) = call_with(&app, "POST", &uri, Some(json!({ "dt": 1.0 })), Some("banana")).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn logs_persist_and_replay() {
    let dir = tempfile::tempdir().unwrap();
    let make = || {
        let log = EventLog::open(dir.path()).unwrap();
        router(Arc::new(AppState::new(ScenarioCatalog::builtin(), Some(log)).unwrap()))
    };
    let app = make();
    let id = new_session(&app, "gas-compressor").await;
    call(&app, "POST", &format!("/sessions/{id}/observations"), Some(json!({ "node": "ld_b", "outcome": "alarm" }))).await;
    call(&app, "POST", &format!("/sessions/{id}/advance"), Some(json!({ "dt": 8.0 }))).await;
    // A rejected request writes nothing.
    call(&app, "POST", &format!("/sessions/{id}/advance"), Some(json!({ "dt": -8.0 }))).await;
    let (_, before) = call(&app, "GET", &format!("/sessions/{id}/diagnosis"), None).await;

    let text = std::fs::read_to_string(dir.path().join(format!("{id}.jsonl"))).unwrap();
    assert_eq!(text.lines().count(), 3);

    let restarted = make();
    let (_, after) = call(&restarted, "GET", &format!("/sessions/{id}/diagnosis"), None).await;
    assert_eq!(before, after);
    assert_eq!(new_session(&restarted, "desk-alarm").await, "s2");
}
