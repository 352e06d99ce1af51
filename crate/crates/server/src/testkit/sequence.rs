//! Random endpoint sequences checked against a model of the lifecycle.
//!
//! Each sequence uploads one occasion (the app must run in
//! [`AnalysisMode::Deferred`](crate::AnalysisMode::Deferred) so it starts in
//! Uploaded) and then issues calls chosen by the caller's bytes. Every reply
//! is compared with what the model allows, and after every call the stored
//! state, version and audit trail are checked.

use axum::http::{Method, StatusCode};
use foodrec_core::{replay, AuditEvent, LifecycleState};
use serde_json::{json, Value};

use super::{metadata_at, upload_body, As, Reply, TestApp};
use crate::error::ErrorCode;

const STUDY: &str = "sequence-study";
const IMAGE_SIDE: i64 = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Op {
    Predictions,
    Analyze,
    ReviewConfirmAll,
    ReviewRemoveAll,
    ReviewUnknownPrediction,
    SaveAnnotations { count: u8, stale: bool },
    SaveBadBox,
    DeleteFirst { stale: bool },
    DeleteMissing,
    Finalize { stale: bool },
    Detail,
    Export,
}

impl Op {
    pub fn from_byte(b: u8) -> Op {
        let stale = b & 0x80 != 0;
        match b % 12 {
            0 => Op::Predictions,
            1 => Op::Analyze,
            2 => Op::ReviewConfirmAll,
            3 => Op::ReviewRemoveAll,
            4 => Op::ReviewUnknownPrediction,
            5 => Op::SaveAnnotations {
                count: (b >> 4) % 4,
                stale,
            },
            6 => Op::SaveBadBox,
            7 => Op::DeleteFirst { stale },
            8 => Op::DeleteMissing,
            9 => Op::Finalize { stale },
            10 => Op::Detail,
            _ => Op::Export,
        }
    }
}

/// What the model expects of one call.
enum Expect {
    Ok,
    Err(ErrorCode),
}

struct Model {
    state: LifecycleState,
    version: u64,
    annotation_ids: Vec<String>,
}

/// Runs one sequence. `png` is the image used for both halves of the
/// upload; a small one keeps the run fast.
pub async fn run_sequence(app: &TestApp, png: &[u8], ops: &[Op]) -> Result<(), String> {
    let body = upload_body("seq", STUDY, &metadata_at("2021-05-01T12:30:00Z"), png, png);
    let up = app.upload(body, None, As::Participant).await;
    if up.status != StatusCode::CREATED {
        return Err(format!("upload failed: {}", up.json));
    }
    let id = up.json["occasion_id"]
        .as_str()
        .unwrap_or_default()
        .to_owned();
    let mut model = Model {
        state: LifecycleState::Uploaded,
        version: 1,
        annotation_ids: Vec::new(),
    };
    check_stored(app, &id, &model).await?;

    for (step, op) in ops.iter().enumerate() {
        let (expect, reply) = apply(app, &id, &mut model, *op).await;
        let ctx = || format!("step {step} {op:?} in {} v{}", model.state, model.version);
        match expect {
            Expect::Ok => {
                if !reply.status.is_success() {
                    return Err(format!("{}: expected success, got {}", ctx(), reply.json));
                }
            }
            Expect::Err(code) => {
                let got = reply.json["code"].as_str().unwrap_or_default();
                if got != code.as_str() || reply.status != code.status() {
                    return Err(format!(
                        "{}: expected {}, got {} {}",
                        ctx(),
                        code.as_str(),
                        reply.status,
                        reply.json
                    ));
                }
            }
        }
        if !reply.status.is_success() {
            let code = reply.json["code"].as_str().unwrap_or_default();
            if !ErrorCode::ALL.iter().any(|c| c.as_str() == code) {
                return Err(format!(
                    "{}: code {code:?} is outside the closed set",
                    ctx()
                ));
            }
        }
        if let Some(v) = reply.json.get("version").and_then(Value::as_u64) {
            if reply.status.is_success() && v != model.version {
                return Err(format!(
                    "{}: reply version {v}, model {}",
                    ctx(),
                    model.version
                ));
            }
        }
        check_stored(app, &id, &model)
            .await
            .map_err(|e| format!("{}: {e}", ctx()))?;
    }
    Ok(())
}

async fn apply(app: &TestApp, id: &str, m: &mut Model, op: Op) -> (Expect, Reply) {
    use LifecycleState::*;
    let occ = format!("/occasions/{id}");
    match op {
        Op::Predictions => {
            let r = app
                .get(&format!("{occ}/predictions"), As::Participant)
                .await;
            let want = if m.state == Uploaded {
                "pending"
            } else {
                "ready"
            };
            if r.json["status"] != want {
                return (Expect::Err(ErrorCode::Internal), r);
            }
            (Expect::Ok, r)
        }
        Op::Analyze => {
            let r = app
                .call(
                    Method::POST,
                    &format!("{occ}/analyze"),
                    As::Researcher,
                    None,
                )
                .await;
            if m.state == Uploaded {
                m.state = Analyzed;
                m.version += 1;
                (Expect::Ok, r)
            } else {
                (Expect::Err(ErrorCode::IllegalTransition), r)
            }
        }
        Op::ReviewConfirmAll | Op::ReviewRemoveAll | Op::ReviewUnknownPrediction => {
            let verdict = match op {
                Op::ReviewConfirmAll => {
                    json!([{"prediction_id": "p1", "verdict": {"kind": "confirmed"}}])
                }
                Op::ReviewRemoveAll => {
                    json!([{"prediction_id": "p1", "verdict": {"kind": "removed"}}])
                }
                _ => json!([{"prediction_id": "p404", "verdict": {"kind": "confirmed"}}]),
            };
            let r = app
                .call(
                    Method::POST,
                    &format!("{occ}/review"),
                    As::Participant,
                    Some(json!({"verdicts": verdict})),
                )
                .await;
            if m.state != Analyzed {
                return (Expect::Err(ErrorCode::IllegalTransition), r);
            }
            if op == Op::ReviewUnknownPrediction {
                return (Expect::Err(ErrorCode::ValidationFailed), r);
            }
            m.state = Refined;
            m.version += 2;
            m.annotation_ids = ids_of(&r.json["annotations"]);
            let drafts = if op == Op::ReviewConfirmAll { 1 } else { 0 };
            if m.annotation_ids.len() != drafts {
                return (Expect::Err(ErrorCode::Internal), r);
            }
            (Expect::Ok, r)
        }
        Op::SaveAnnotations { count, stale } => {
            let list: Vec<Value> = (0..i64::from(count))
                .map(|i| json!({"box": {"x_px": i, "y_px": i, "w_px": 4, "h_px": 4}, "label": "milk"}))
                .collect();
            let expected = if stale {
                m.version.saturating_sub(1)
            } else {
                m.version
            };
            let r = put(app, &occ, expected, list).await;
            if m.state != Refined {
                (Expect::Err(ErrorCode::IllegalTransition), r)
            } else if stale {
                (Expect::Err(ErrorCode::VersionConflict), r)
            } else {
                m.version += 1;
                m.annotation_ids = ids_of(&r.json["annotations"]);
                (Expect::Ok, r)
            }
        }
        Op::SaveBadBox => {
            let bad = json!({"box": {"x_px": IMAGE_SIDE - 2, "y_px": 0, "w_px": 4, "h_px": 4}, "label": "milk"});
            let r = put(app, &occ, m.version, vec![bad]).await;
            if m.state != Refined {
                (Expect::Err(ErrorCode::IllegalTransition), r)
            } else {
                (Expect::Err(ErrorCode::ValidationFailed), r)
            }
        }
        Op::DeleteFirst { stale } => {
            let aid = m
                .annotation_ids
                .first()
                .cloned()
                .unwrap_or_else(|| "none".into());
            let expected = if stale {
                m.version.saturating_sub(1)
            } else {
                m.version
            };
            let r = delete(app, &occ, &aid, expected).await;
            if m.state != Refined {
                (Expect::Err(ErrorCode::IllegalTransition), r)
            } else if m.annotation_ids.is_empty() {
                (Expect::Err(ErrorCode::NotFound), r)
            } else if stale {
                (Expect::Err(ErrorCode::VersionConflict), r)
            } else {
                m.version += 1;
                m.annotation_ids.remove(0);
                (Expect::Ok, r)
            }
        }
        Op::DeleteMissing => {
            let r = delete(app, &occ, "no-such-annotation", m.version).await;
            if m.state != Refined {
                (Expect::Err(ErrorCode::IllegalTransition), r)
            } else {
                (Expect::Err(ErrorCode::NotFound), r)
            }
        }
        Op::Finalize { stale } => {
            let expected = if stale {
                m.version.saturating_sub(1)
            } else {
                m.version
            };
            let r = app
                .call(
                    Method::POST,
                    &format!("{occ}/finalize"),
                    As::Researcher,
                    Some(json!({"expected_version": expected, "initials": "RS"})),
                )
                .await;
            if m.state != Refined {
                (Expect::Err(ErrorCode::IllegalTransition), r)
            } else if stale {
                (Expect::Err(ErrorCode::VersionConflict), r)
            } else if m.annotation_ids.is_empty() {
                (Expect::Err(ErrorCode::ValidationFailed), r)
            } else {
                m.state = Finalized;
                m.version += 1;
                (Expect::Ok, r)
            }
        }
        Op::Detail => (Expect::Ok, app.get(&occ, As::Researcher).await),
        Op::Export => {
            let r = app
                .get(
                    &format!("/studies/{STUDY}/export?format=csv"),
                    As::Researcher,
                )
                .await;
            (Expect::Ok, r)
        }
    }
}

async fn put(app: &TestApp, occ: &str, expected: u64, list: Vec<Value>) -> Reply {
    app.call(
        Method::PUT,
        &format!("{occ}/annotations"),
        As::Researcher,
        Some(json!({"expected_version": expected, "initials": "RS", "annotations": list})),
    )
    .await
}

async fn delete(app: &TestApp, occ: &str, aid: &str, expected: u64) -> Reply {
    app.call(
        Method::DELETE,
        &format!("{occ}/annotations/{aid}?expected_version={expected}&initials=RS"),
        As::Researcher,
        None,
    )
    .await
}

fn ids_of(list: &Value) -> Vec<String> {
    list.as_array()
        .map(|a| {
            a.iter()
                .filter_map(|x| x["annotation_id"].as_str().map(str::to_owned))
                .collect()
        })
        .unwrap_or_default()
}

/// Stored state and version match the model, the history is the ordered
/// prefix of the lifecycle, and the audit trail has one event per version
/// and replays to the stored record.
async fn check_stored(app: &TestApp, id: &str, m: &Model) -> Result<(), String> {
    let d = app.get(&format!("/occasions/{id}"), As::Researcher).await;
    let state = d.json["state"].as_str().unwrap_or_default();
    if state != m.state.to_string() {
        return Err(format!("stored state {state}, model {}", m.state));
    }
    if d.json["version"].as_u64() != Some(m.version) {
        return Err(format!(
            "stored version {}, model {}",
            d.json["version"], m.version
        ));
    }
    let history: Vec<String> = d.json["history"]
        .as_array()
        .map(|h| {
            h.iter()
                .filter_map(|x| x["state"].as_str().map(str::to_owned))
                .collect()
        })
        .unwrap_or_default();
    let prefix: Vec<String> = LifecycleState::ALL
        .iter()
        .take(history.len())
        .map(|s| s.to_string())
        .collect();
    if history != prefix || history.last().map(String::as_str) != Some(state) {
        return Err(format!(
            "history {history:?} is not an ordered prefix ending in {state}"
        ));
    }

    let audit = app
        .get(&format!("/occasions/{id}/audit"), As::Researcher)
        .await;
    let events: Vec<AuditEvent> = serde_json::from_value(audit.json["events"].clone())
        .map_err(|e| format!("audit trail: {e}"))?;
    if events.len() as u64 != m.version {
        return Err(format!(
            "{} audit events for version {}",
            events.len(),
            m.version
        ));
    }
    let rebuilt = replay(&events)
        .map_err(|e| format!("replay: {e}"))?
        .ok_or("empty trail")?;
    if rebuilt.version() != m.version || rebuilt.state() != m.state {
        return Err(format!(
            "replay gives {} v{}",
            rebuilt.state(),
            rebuilt.version()
        ));
    }
    Ok(())
}
