//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each
//! and exits non-zero if any failed.
//!
//! `cargo test -p foodrec-cli --test acceptance`

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::{Arc, Barrier};
use std::time::{Duration, Instant};

use common::*;
use foodrec_core::analysis::{write_metrics_csv, SidecarStub, METRICS_CSV_HEADER};
use foodrec_core::api::{ExportBundle, OccasionDetail};
use foodrec_core::{
    canonical, classify_estimate, mean_error_rate, replay, validate_box, AuditEvent, BoundingBox,
    EstimateClass, EvaluationRecord, FoodCode, FoodDatabase, FoodItem, ImageCapture, ImageKind,
    LifecycleState, MediaType,
};
use foodrec_server::testkit::sequence::{run_sequence, Op};
use foodrec_server::testkit::{png, sample_foods, As, TestApp, RESEARCHER_TOKEN};
use foodrec_server::{AnalysisMode, RunningServer};
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use reqwest::{Method, StatusCode};
use serde_json::{json, Value};

type Outcome = Result<String, String>;
type Criterion = (&'static str, &'static str, fn() -> Outcome);

fn main() {
    let criteria: Vec<Criterion> = vec![
        ("AC1", "full-protocol round trip", full_protocol_round_trip),
        ("AC2", "search reproduction", search_reproduction),
        ("AC3", "state-machine safety", state_machine_safety),
        ("AC4", "box validity", box_validity),
        ("AC5", "audit replay", audit_replay),
        ("AC6", "version conflict", version_conflict),
        ("AC7", "metric oracle", metric_oracle),
        ("AC8", "idempotent upload", idempotent_upload),
    ];
    let filter: Vec<String> = std::env::args()
        .skip(1)
        .filter(|a| !a.starts_with('-'))
        .collect();
    let mut failed = 0;
    for (id, name, check) in criteria {
        if !filter.is_empty() && !filter.iter().any(|f| f == id) {
            continue;
        }
        let started = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        let secs = started.elapsed().as_secs_f64();
        match result {
            Ok(note) => println!("[PASS] {id} {name} ({secs:.1}s): {note}"),
            Err(why) => {
                failed += 1;
                println!("[FAIL] {id} {name} ({secs:.1}s): {why}");
            }
        }
    }
    if failed > 0 {
        println!("{failed} criterion/criteria failed");
        std::process::exit(1);
    }
}

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        let ok: bool = $cond;
        if !ok {
            return Err(format!($($fmt)+));
        }
    };
}

fn runtime() -> tokio::runtime::Runtime {
    tokio::runtime::Builder::new_current_thread()
        .enable_all()
        .build()
        .unwrap()
}

fn http() -> reqwest::blocking::Client {
    reqwest::blocking::Client::new()
}

fn researcher(req: reqwest::blocking::RequestBuilder) -> (StatusCode, Value) {
    let resp = req.bearer_auth(RESEARCHER_TOKEN).send().unwrap();
    let status = StatusCode::from_u16(resp.status().as_u16()).unwrap();
    (status, resp.json().unwrap_or(Value::Null))
}

// AC1

fn full_protocol_round_trip() -> Outcome {
    let started = Instant::now();
    let sidecars = tempfile::tempdir().unwrap();
    std::fs::write(
        sidecars.path().join("meal-before.png.predictions.json"),
        r#"[{"label":"pasta","x_px":60,"y_px":50,"confidence":0.92},
            {"label":"soda","x_px":160,"y_px":30,"confidence":0.55}]"#,
    )
    .unwrap();
    let server = Server::with(
        Box::new(SidecarStub::new(sidecars.path())),
        AnalysisMode::Inline,
    );
    let url = server.url();
    let state = tempfile::tempdir().unwrap();
    let images = tempfile::tempdir().unwrap();
    let pair = image_pair(images.path(), "meal", 7);

    let cap = mfr(
        &url,
        state.path(),
        &[
            "--participant",
            "p42",
            "--study",
            "feeding-study",
            "capture",
            pair.0.to_str().unwrap(),
            pair.1.to_str().unwrap(),
            "--time",
            "2021-05-01T12:30:00Z",
            "--lat",
            "40.42",
            "--lon",
            "-86.91",
            "--fiducial",
            "--fiducial-scale",
            "0.5",
        ],
        "",
    );
    ensure!(cap.code == 0, "capture: {}", cap.err);
    let sync = mfr(&url, state.path(), &["sync"], "");
    ensure!(sync.code == 0, "sync: {}", sync.err);
    let id = synced_ids(&sync).pop().ok_or("sync printed no occasion")?;

    let answers = images.path().join("answers.txt");
    std::fs::write(&answers, "c\nr\nwater\n1\nn\n").unwrap();
    let review = mfr(
        &url,
        state.path(),
        &["review", &id, "--answers", answers.to_str().unwrap()],
        "",
    );
    ensure!(review.code == 0, "review: {}\n{}", review.out, review.err);
    ensure!(
        review.out.contains("Refined"),
        "review did not reach Refined: {}",
        review.out
    );

    let api = format!("{url}/api/v1");
    let (_, detail) = researcher(http().get(format!("{api}/occasions/{id}")));
    let detail: OccasionDetail = serde_json::from_value(detail).map_err(|e| e.to_string())?;
    ensure!(
        detail.researcher.annotations.len() == 2,
        "expected two drafts"
    );
    let pasta_draft = &detail.researcher.annotations[0];
    ensure!(pasta_draft.initials.as_str() == "SYS", "drafts carry SYS");

    let body = json!({
        "expected_version": detail.version,
        "initials": "JW",
        "annotations": [
            {"annotation_id": pasta_draft.annotation_id, "box": {"x_px": 30, "y_px": 20, "w_px": 60, "h_px": 55},
             "label": "pasta", "energy_kcal": 352.5},
            {"box": {"x_px": 140, "y_px": 10, "w_px": 40, "h_px": 40}, "label": "water", "food_code": "94000100",
             "energy_kcal": 0.0}
        ]
    });
    let (s, saved) = researcher(
        http()
            .put(format!("{api}/occasions/{id}/annotations"))
            .json(&body),
    );
    ensure!(s == StatusCode::OK, "save: {saved}");
    let (s, fin) = researcher(
        http()
            .post(format!("{api}/occasions/{id}/finalize"))
            .json(&json!({"expected_version": saved["version"], "initials": "JW"})),
    );
    ensure!(s == StatusCode::OK, "finalize: {fin}");

    let (_, detail) = researcher(http().get(format!("{api}/occasions/{id}")));
    let states: Vec<LifecycleState> = detail["history"]
        .as_array()
        .unwrap()
        .iter()
        .map(|h| serde_json::from_value(h["state"].clone()).unwrap())
        .collect();
    ensure!(
        states == LifecycleState::ALL,
        "states traversed: {states:?}"
    );

    let export = http()
        .get(format!("{api}/studies/feeding-study/export?format=json"))
        .bearer_auth(RESEARCHER_TOKEN)
        .send()
        .unwrap()
        .bytes()
        .unwrap();
    let bundle: ExportBundle = serde_json::from_slice(&export).map_err(|e| e.to_string())?;
    ensure!(
        bundle.occasions.len() == 1,
        "export has {} occasions",
        bundle.occasions.len()
    );
    let pasta = &bundle.occasions[0].researcher_annotations[0];
    ensure!(
        pasta.bbox == BoundingBox::new(30, 20, 60, 55)
            && pasta.label == "pasta"
            && pasta.food_code.as_ref().map(|c| c.as_str()) == Some("56100100")
            && pasta.initials == "JW"
            && pasta.energy_kcal == Some(352.5),
        "exported annotation: {pasta:?}"
    );
    let csv = http()
        .get(format!("{api}/studies/feeding-study/export?format=csv"))
        .bearer_auth(RESEARCHER_TOKEN)
        .send()
        .unwrap()
        .text()
        .unwrap();
    let row = format!("{id},p42,JW,pasta,56100100,30,20,60,55,352.5,Finalized");
    ensure!(csv.lines().any(|l| l == row), "csv lacks {row}:\n{csv}");

    let secs = started.elapsed().as_secs_f64();
    ensure!(secs < 30.0, "took {secs:.1}s");
    Ok(format!("5 states in order, export verified, {secs:.2}s"))
}

// AC2

/// Matches bucketed exact / prefix / substring, each sorted by
/// case-folded name, then name, then code.
fn search_oracle(items: &[FoodItem], query: &str) -> Vec<FoodItem> {
    let q = query.trim().to_lowercase();
    if q.is_empty() {
        return vec![];
    }
    let numeric = q.bytes().all(|b| b.is_ascii_digit());
    let rank = |it: &FoodItem| -> Option<u8> {
        let name = it.name.to_lowercase();
        let code = it.code.as_str();
        if name == q || (numeric && code == q) {
            Some(0)
        } else if name.starts_with(&q) || (numeric && code.starts_with(&q)) {
            Some(1)
        } else if name.contains(&q) {
            Some(2)
        } else {
            None
        }
    };
    let mut hits: Vec<(u8, String, String, String, FoodItem)> = items
        .iter()
        .filter_map(|it| {
            rank(it).map(|r| {
                (
                    r,
                    it.name.to_lowercase(),
                    it.name.clone(),
                    it.code.as_str().to_owned(),
                    it.clone(),
                )
            })
        })
        .collect();
    hits.sort_by(|a, b| (a.0, &a.1, &a.2, &a.3).cmp(&(b.0, &b.1, &b.2, &b.3)));
    hits.into_iter().map(|h| h.4).collect()
}

fn search_reproduction() -> Outcome {
    let app = TestApp::new(
        sample_foods(),
        Box::new(foodrec_core::GridStub::new()),
        AnalysisMode::Inline,
    );
    let r = runtime().block_on(app.get("/foods/search?q=potato", As::Participant));
    let got: std::collections::BTreeSet<(String, String)> = r.json["results"]
        .as_array()
        .ok_or("no results array")?
        .iter()
        .map(|i| {
            (
                i["name"].as_str().unwrap().to_owned(),
                i["code"].as_str().unwrap().to_owned(),
            )
        })
        .collect();
    let want: std::collections::BTreeSet<(String, String)> = [
        ("potato", "58100100"),
        ("potato wedges", "58100110"),
        ("roast potato", "58100120"),
    ]
    .iter()
    .map(|(n, c)| (n.to_string(), c.to_string()))
    .collect();
    ensure!(got == want, "potato search gave {got:?}");

    let words = [
        "potato", "roast", "wedges", "pot", "ato", "milk", "Juice", "juice", "Ölbrot", "rice",
        "oat milk",
    ];
    let queries = [
        "", "  ", "potato", "POT", "to w", "juice", "öl", "zzz", "a", "ato", "58", "7", "71003",
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for case in 0..1000 {
        let n = rng.random_range(0..30);
        let items: Vec<FoodItem> = (0..n)
            .map(|i| {
                let parts = rng.random_range(1..4);
                let name = (0..parts)
                    .map(|_| *words.choose(&mut rng).unwrap())
                    .collect::<Vec<_>>()
                    .join(" ");
                FoodItem {
                    code: FoodCode::parse(&format!("{}{:03}", 71 + rng.random_range(0..3), i))
                        .unwrap(),
                    name,
                    energy_kcal_per_100g: None,
                }
            })
            .collect();
        let query = if rng.random_bool(0.7) {
            queries.choose(&mut rng).unwrap().to_string()
        } else {
            (0..rng.random_range(1..4))
                .map(|_| *b"aeiopst w0178".choose(&mut rng).unwrap() as char)
                .collect()
        };
        let db = FoodDatabase::from_items(items.clone()).map_err(|e| e.to_string())?;
        let got: Vec<FoodItem> = db.search(&query).into_iter().cloned().collect();
        let want = search_oracle(&items, &query);
        ensure!(
            got == want,
            "case {case}: query {query:?} over {items:?}\n got {got:?}\nwant {want:?}"
        );
    }
    Ok("exact potato set with codes; 1000/1000 randomized cases equal brute force".into())
}

// AC3

fn state_machine_safety() -> Outcome {
    let rt = runtime();
    let png16 = png(16, 16, 1);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut app = TestApp::new(
        sample_foods(),
        Box::new(foodrec_core::GridStub::new()),
        AnalysisMode::Deferred,
    );
    let mut calls = 0usize;
    for case in 0..10_000 {
        // A fresh store now and then keeps the study export small.
        if case % 250 == 0 {
            app = TestApp::new(
                sample_foods(),
                Box::new(foodrec_core::GridStub::new()),
                AnalysisMode::Deferred,
            );
        }
        let len = rng.random_range(0..20);
        let ops: Vec<Op> = (0..len).map(|_| Op::from_byte(rng.random())).collect();
        calls += ops.len();
        rt.block_on(run_sequence(&app, &png16, &ops))
            .map_err(|e| format!("case {case} {ops:?}: {e}"))?;
    }
    Ok(format!(
        "10000 sequences, {calls} endpoint calls, no violation"
    ))
}

// AC4

fn image(w: u32, h: u32) -> ImageCapture {
    ImageCapture {
        kind: ImageKind::Before,
        content_hash: String::new(),
        width_px: w,
        height_px: h,
        media_type: MediaType::Png,
        byte_length: 0,
    }
}

/// Valid iff the box covers at least one pixel and only image pixels.
fn box_oracle(b: &BoundingBox, w: i64, h: i64) -> bool {
    b.w_px >= 1
        && b.h_px >= 1
        && (b.x_px..b.x_px + b.w_px).all(|x| (0..w).contains(&x))
        && (b.y_px..b.y_px + b.h_px).all(|y| (0..h).contains(&y))
}

fn box_validity() -> Outcome {
    let img = image(8, 8);
    let (mut accepted, mut checked) = (0, 0);
    for x in -4..=12 {
        for y in -4..=12 {
            for w in -2..=12 {
                for h in -2..=12 {
                    let b = BoundingBox::new(x, y, w, h);
                    let ok = validate_box(&b, &img).is_ok();
                    ensure!(ok == box_oracle(&b, 8, 8), "{b:?}: validate_box says {ok}");
                    accepted += usize::from(ok);
                    checked += 1;
                }
            }
        }
    }
    ensure!(accepted == 1296, "{accepted} boxes accepted on 8x8");
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..100_000 {
        let (w, h) = (rng.random_range(1..40u32), rng.random_range(1..40u32));
        let b = BoundingBox::new(
            rng.random_range(-5..45),
            rng.random_range(-5..45),
            rng.random_range(-3..45),
            rng.random_range(-3..45),
        );
        ensure!(
            validate_box(&b, &image(w, h)).is_ok() == box_oracle(&b, i64::from(w), i64::from(h)),
            "{b:?} on {w}x{h}"
        );
    }
    Ok(format!(
        "1296 of {checked} boxes accepted on 8x8, all agree; 100000 random boxes agree"
    ))
}

// AC5

fn audit_replay() -> Outcome {
    let rt = runtime();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let app = TestApp::new(
        sample_foods(),
        Box::new(foodrec_core::GridStub::new()),
        AnalysisMode::Inline,
    );
    let labels = ["milk", "potato", "juice", "home-made stew", "bread"];
    let png32 = png(32, 32, 9);
    let mut total_ops = 0;
    for case in 0..1000 {
        rt.block_on(async {
            let body = foodrec_server::testkit::upload_body(
                "p1",
                "replay",
                &foodrec_server::testkit::metadata_at("2021-05-01T12:30:00Z"),
                &png32,
                &png32,
            );
            let up = app.upload(body, None, As::Participant).await;
            let id = up.json["occasion_id"].as_str().unwrap().to_owned();
            let occ = format!("/occasions/{id}");
            let review = json!({"verdicts": [{"prediction_id": "p1", "verdict": {"kind": "confirmed"}}],
                                "additions": [{"label": "water", "pin": {"x_px": 3, "y_px": 4}}]});
            let r = app.call(Method::POST, &format!("{occ}/review"), As::Participant, Some(review)).await;
            let mut version = r.json["version"].as_u64().unwrap();
            let mut current: Vec<Value> = r.json["annotations"].as_array().unwrap().clone();

            for _ in 0..rng.random_range(1..12) {
                total_ops += 1;
                match rng.random_range(0..10) {
                    0..=5 => {
                        let mut next = Vec::new();
                        for a in &current {
                            match rng.random_range(0..4) {
                                0 => {}
                                1 => {
                                    let mut a = a.clone();
                                    a["box"]["x_px"] = json!(rng.random_range(0..16));
                                    a["energy_kcal"] = json!(rng.random_range(0..5000) as f64 / 10.0);
                                    next.push(a);
                                }
                                _ => next.push(a.clone()),
                            }
                        }
                        for _ in 0..rng.random_range(0..3) {
                            let mut a = json!({
                                "box": {"x_px": rng.random_range(0..16), "y_px": rng.random_range(0..16), "w_px": 8, "h_px": 8},
                                "label": labels.choose(&mut rng).unwrap(),
                            });
                            if a["label"] == "juice" {
                                a["food_code"] = json!("61210010");
                            }
                            next.push(a);
                        }
                        let stale = rng.random_bool(0.1);
                        let expected = if stale { version - 1 } else { version };
                        let r = app
                            .call(
                                Method::PUT,
                                &format!("{occ}/annotations"),
                                As::Researcher,
                                Some(json!({"expected_version": expected, "initials": "AB", "annotations": next})),
                            )
                            .await;
                        if stale {
                            assert_eq!(r.status, StatusCode::CONFLICT, "{}", r.json);
                        } else {
                            assert_eq!(r.status, StatusCode::OK, "{}", r.json);
                            version += 1;
                            current = r.json["annotations"].as_array().unwrap().clone();
                        }
                    }
                    6..=8 if !current.is_empty() => {
                        let victim = current.choose(&mut rng).unwrap()["annotation_id"].as_str().unwrap().to_owned();
                        let r = app
                            .call(
                                Method::DELETE,
                                &format!("{occ}/annotations/{victim}?expected_version={version}&initials=CD"),
                                As::Researcher,
                                None,
                            )
                            .await;
                        assert_eq!(r.status, StatusCode::OK, "{}", r.json);
                        version += 1;
                        current = r.json["annotations"].as_array().unwrap().clone();
                    }
                    _ if !current.is_empty() => {
                        let r = app
                            .call(
                                Method::POST,
                                &format!("{occ}/finalize"),
                                As::Researcher,
                                Some(json!({"expected_version": version, "initials": "EF"})),
                            )
                            .await;
                        assert_eq!(r.status, StatusCode::OK, "{}", r.json);
                        version += 1;
                        break;
                    }
                    _ => {}
                }
            }

            let audit = app.get(&format!("{occ}/audit"), As::Researcher).await;
            let events: Vec<AuditEvent> = serde_json::from_value(audit.json["events"].clone()).unwrap();
            let rebuilt = replay(&events)
                .map_err(|e| format!("case {case}: {e}"))?
                .ok_or(format!("case {case}: empty trail"))?;
            let stored = app.service.records().load_occasion(&id.as_str().into()).unwrap();
            let a = canonical::to_string(&rebuilt.annotations).unwrap();
            let b = canonical::to_string(&stored.annotations).unwrap();
            if a != b {
                return Err(format!("case {case}: replayed annotations differ\n{a}\n{b}"));
            }
            if canonical::to_string(&rebuilt).unwrap() != canonical::to_string(&stored).unwrap() {
                return Err(format!("case {case}: replayed record differs"));
            }
            if stored.version() != version {
                return Err(format!("case {case}: version {} vs {version}", stored.version()));
            }
            Ok(())
        })?;
    }
    Ok(format!(
        "1000 cases, {total_ops} edit/delete/save/finalize ops, annotation sets byte-identical"
    ))
}

// AC6

fn version_conflict() -> Outcome {
    let app = TestApp::new(
        sample_foods(),
        Box::new(foodrec_core::GridStub::new()),
        AnalysisMode::Inline,
    );
    let server = RunningServer::start(app.router.clone()).unwrap();
    let api = format!("{}/api/v1", server.url());
    let rt = runtime();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut first_wins = 0;
    for rep in 0..100 {
        let (id, v) = rt.block_on(async {
            let body = foodrec_server::testkit::upload_body(
                "p1",
                "race",
                &foodrec_server::testkit::metadata_at("2021-05-01T12:30:00Z"),
                &png(40, 40, rep),
                &png(40, 40, rep + 1),
            );
            let up = app.upload(body, None, As::Participant).await;
            let id = up.json["occasion_id"].as_str().unwrap().to_owned();
            let review =
                json!({"verdicts": [{"prediction_id": "p1", "verdict": {"kind": "confirmed"}}]});
            let r = app
                .call(
                    Method::POST,
                    &format!("/occasions/{id}/review"),
                    As::Participant,
                    Some(review),
                )
                .await;
            (id, r.json["version"].as_u64().unwrap())
        });
        let barrier = Arc::new(Barrier::new(2));
        let delays = [rng.random_range(0..1500u64), rng.random_range(0..1500u64)];
        let handles: Vec<_> = [("AA", 1), ("BB", 2)]
            .into_iter()
            .zip(delays)
            .map(|((initials, x), delay)| {
                let (api, id, barrier) = (api.clone(), id.clone(), barrier.clone());
                std::thread::spawn(move || {
                    let body = json!({"expected_version": v, "initials": initials, "annotations": [
                        {"box": {"x_px": x, "y_px": 1, "w_px": 5, "h_px": 5}, "label": "milk"}]});
                    let req = http()
                        .put(format!("{api}/occasions/{id}/annotations"))
                        .json(&body);
                    barrier.wait();
                    std::thread::sleep(Duration::from_micros(delay));
                    researcher(req)
                })
            })
            .collect();
        let results: Vec<(StatusCode, Value)> =
            handles.into_iter().map(|h| h.join().unwrap()).collect();
        let ok: Vec<usize> = (0..2).filter(|&i| results[i].0 == StatusCode::OK).collect();
        let conflict: Vec<usize> = (0..2)
            .filter(|&i| {
                results[i].0 == StatusCode::CONFLICT && results[i].1["code"] == "VERSION_CONFLICT"
            })
            .collect();
        ensure!(
            ok.len() == 1 && conflict.len() == 1,
            "rep {rep}: {results:?}"
        );
        ensure!(
            results[conflict[0]].1["details"]["current_version"] == v + 1,
            "rep {rep}: conflict body"
        );
        let (_, detail) = researcher(http().get(format!("{api}/occasions/{id}")));
        ensure!(
            detail["version"] == v + 1,
            "rep {rep}: version {}",
            detail["version"]
        );
        let winner = if ok[0] == 0 { "AA" } else { "BB" };
        ensure!(
            detail["researcher"]["annotations"][0]["initials"] == winner,
            "rep {rep}: stored loser's edit"
        );
        first_wins += usize::from(ok[0] == 0);
    }
    Ok(format!(
        "100/100 exactly one success and one VERSION_CONFLICT (first writer won {first_wins})"
    ))
}

// AC7

fn naive_mer(pairs: &[(f64, f64)]) -> f64 {
    let mut total = 0.0;
    for (gt, est) in pairs {
        total += (est - gt).abs() / gt;
    }
    100.0 * total / pairs.len() as f64
}

fn records(pairs: &[(f64, f64)]) -> Vec<EvaluationRecord> {
    pairs
        .iter()
        .enumerate()
        .map(|(i, &(g, e))| EvaluationRecord {
            occasion_id: format!("o{i}").into(),
            groundtruth_kcal: g,
            estimated_kcal: e,
            estimator_id: "acceptance".into(),
        })
        .collect()
}

fn metric_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst = 0.0f64;
    for case in 0..10_000 {
        let n = rng.random_range(1..120);
        let pairs: Vec<(f64, f64)> = (0..n)
            .map(|_| {
                let gt = 10f64.powf(rng.random_range(-2.0..4.0));
                (gt, gt * rng.random_range(0.0..3.0))
            })
            .collect();
        let got = mean_error_rate(&records(&pairs)).map_err(|e| e.to_string())?;
        let want = naive_mer(&pairs);
        let rel = if got == want {
            0.0
        } else {
            (got - want).abs() / want.abs().max(got.abs())
        };
        worst = worst.max(rel);
        ensure!(rel <= 1e-12, "case {case}: {got} vs {want}");
    }

    let half: Vec<(f64, f64)> = (1..=250)
        .map(|i| (i as f64 * 7.3, i as f64 * 7.3 / 2.0))
        .collect();
    let mer = mean_error_rate(&records(&half)).map_err(|e| e.to_string())?;
    ensure!(mer == 50.0, "half estimates give {mer}");

    // Over/under scatter from synthetic data.
    let synthetic: Vec<(f64, f64)> = (0..300)
        .map(|_| {
            let gt = rng.random_range(200.0..1500.0);
            (gt, gt * (1.0 + rng.random_range(-0.4..0.4)))
        })
        .collect();
    let recs = records(&synthetic);
    let mut buf = Vec::new();
    write_metrics_csv(&recs, 0.05, &mut buf).map_err(|e| e.to_string())?;
    let text = String::from_utf8(buf).map_err(|e| e.to_string())?;
    let mut lines = text.lines();
    ensure!(
        lines.next() == Some(METRICS_CSV_HEADER.join(",").as_str()),
        "scatter header"
    );
    let mut counts = [0usize; 3];
    for (line, rec) in lines.zip(&recs) {
        let row: Vec<&str> = line.split(',').collect();
        ensure!(row[0] == rec.occasion_id.as_str(), "scatter row {line}");
        let class = classify_estimate(rec, 0.05);
        ensure!(row[4] == class.as_str(), "scatter row {line}");
        counts[match class {
            EstimateClass::Over => 0,
            EstimateClass::Under => 1,
            EstimateClass::Exact => 2,
        }] += 1;
    }
    ensure!(
        counts.iter().sum::<usize>() == 300 && counts[0] > 0 && counts[1] > 0,
        "scatter {counts:?}"
    );
    Ok(format!(
        "10000 sets within {worst:.1e} relative; half set = 50.0 exactly; scatter over/under/within = {counts:?}"
    ))
}

// AC8

fn idempotent_upload() -> Outcome {
    let server = Server::grid();
    let proxy = FaultProxy::start(server.running.addr());
    let url = proxy.url();
    let state = tempfile::tempdir().unwrap();
    let images = tempfile::tempdir().unwrap();
    let pair = image_pair(images.path(), "meal", 1);
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut captured = 0u64;
    for rep in 0..50 {
        let drafts = rng.random_range(1..=3);
        for _ in 0..drafts {
            capture(&url, state.path(), &pair);
        }
        captured += drafts;
        let cut = rng.random_range(1..=drafts) as usize;
        let before = proxy.dropped();
        proxy.drop_uploads(cut);
        let first = mfr(&url, state.path(), &["sync"], "");
        ensure!(
            proxy.dropped() - before == cut,
            "rep {rep}: {} cuts",
            proxy.dropped() - before
        );
        ensure!(
            first.code == 4,
            "rep {rep}: first sync exit {} {}",
            first.code,
            first.err
        );
        let retry = mfr(&url, state.path(), &["sync"], "");
        ensure!(
            retry.code == 0,
            "rep {rep}: retry exit {} {}",
            retry.code,
            retry.err
        );
        ensure!(
            server.occasions() == captured,
            "rep {rep}: {} occasions for {captured} drafts",
            server.occasions()
        );
    }
    Ok(format!(
        "50 fault-injected syncs, {captured} drafts, {} responses cut, no duplicates",
        proxy.dropped()
    ))
}
