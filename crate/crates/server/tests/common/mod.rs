#![allow(dead_code)]

use axum::http::{Method, StatusCode};
use foodrec_core::analysis::{GridStub, SidecarStub};
use foodrec_server::testkit::{metadata_at, png, sample_foods, upload_body, As, TestApp};
use foodrec_server::AnalysisMode;
use serde_json::{json, Value};

pub fn grid_app() -> TestApp {
    TestApp::new(
        sample_foods(),
        Box::new(GridStub::new()),
        AnalysisMode::Inline,
    )
}

pub fn sidecar_app(dir: &std::path::Path, mode: AnalysisMode) -> TestApp {
    TestApp::new(sample_foods(), Box::new(SidecarStub::new(dir)), mode)
}

/// Uploads a 200x100 pair; returns the occasion id.
pub async fn upload(app: &TestApp, participant: &str, seed: u32) -> String {
    let body = upload_body(
        participant,
        "study-1",
        &metadata_at("2021-05-01T12:30:00Z"),
        &png(200, 100, seed),
        &png(200, 100, seed + 1),
    );
    let r = app.upload(body, None, As::Participant).await;
    assert_eq!(r.status, StatusCode::CREATED, "{}", r.json);
    r.json["occasion_id"].as_str().unwrap().to_owned()
}

pub async fn confirm_all(app: &TestApp, id: &str) -> Value {
    let preds = app
        .get(&format!("/occasions/{id}/predictions"), As::Participant)
        .await;
    let verdicts: Vec<Value> = preds.json["predictions"]
        .as_array()
        .unwrap()
        .iter()
        .map(|p| json!({"prediction_id": p["prediction_id"], "verdict": {"kind": "confirmed"}}))
        .collect();
    let r = app
        .call(
            Method::POST,
            &format!("/occasions/{id}/review"),
            As::Participant,
            Some(json!({ "verdicts": verdicts })),
        )
        .await;
    assert_eq!(r.status, StatusCode::OK, "{}", r.json);
    r.json
}

/// An occasion driven to Refined with the grid stub's single draft.
pub async fn refined(app: &TestApp, seed: u32) -> (String, u64) {
    let id = upload(app, "p1", seed).await;
    let r = confirm_all(app, &id).await;
    (id, r["version"].as_u64().unwrap())
}

pub fn annotation(x: i64, label: &str, kcal: Option<f64>) -> Value {
    let mut a = json!({"box": {"x_px": x, "y_px": 10, "w_px": 20, "h_px": 20}, "label": label});
    if let Some(k) = kcal {
        a["energy_kcal"] = json!(k);
    }
    a
}

pub async fn put_annotations(
    app: &TestApp,
    id: &str,
    version: u64,
    initials: &str,
    list: Vec<Value>,
) -> foodrec_server::testkit::Reply {
    app.call(
        Method::PUT,
        &format!("/occasions/{id}/annotations"),
        As::Researcher,
        Some(json!({"expected_version": version, "initials": initials, "annotations": list})),
    )
    .await
}

pub async fn finalize(app: &TestApp, id: &str, version: u64) -> foodrec_server::testkit::Reply {
    app.call(
        Method::POST,
        &format!("/occasions/{id}/finalize"),
        As::Researcher,
        Some(json!({"expected_version": version, "initials": "JW"})),
    )
    .await
}

pub fn code(r: &foodrec_server::testkit::Reply) -> &str {
    r.json["code"].as_str().unwrap_or("<no code>")
}
