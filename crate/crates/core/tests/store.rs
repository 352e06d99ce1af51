mod common;

use std::sync::{Arc, Barrier};

use chrono::Duration;
use common::{record, t0};
use foodrec_core::store::{replay, AuditEntry};
use foodrec_core::{
    canonical, AuditAction, AuditActor, AuditEvent, BoundingBox, Initials, LifecycleState,
    OccasionId, RecordStore, ResearcherAnnotation, StoreError,
};

fn upload_entry() -> AuditEntry {
    AuditEntry::new(
        AuditActor::Participant("p1".into()),
        AuditAction::Uploaded,
        t0(),
    )
}

fn system(action: AuditAction) -> AuditEntry {
    AuditEntry::new(AuditActor::System, action, t0())
}

#[test]
fn create_gives_version_one_and_round_trips() {
    let store = RecordStore::open_in_memory().unwrap();
    let mut rec = record("o1", "p1", 0);
    assert_eq!(store.save_occasion(&mut rec, 0, upload_entry()).unwrap(), 1);
    let loaded = store.load_occasion(&"o1".into()).unwrap();
    assert_eq!(loaded, rec);
    assert_eq!(loaded.version(), 1);
}

#[test]
fn stale_and_unknown_writes() {
    let store = RecordStore::open_in_memory().unwrap();
    let mut rec = record("o1", "p1", 0);
    store.save_occasion(&mut rec, 0, upload_entry()).unwrap();
    rec.advance(LifecycleState::Analyzed, t0()).unwrap();
    assert_eq!(
        store
            .save_occasion(&mut rec, 1, system(AuditAction::Analyzed))
            .unwrap(),
        2
    );

    let mut stale = store.load_occasion(&"o1".into()).unwrap();
    assert!(matches!(
        store.save_occasion(&mut stale, 1, system(AuditAction::Analyzed)),
        Err(StoreError::VersionConflict { stored: 2 })
    ));
    let mut again = record("o1", "p1", 0);
    assert!(matches!(
        store.save_occasion(&mut again, 0, upload_entry()),
        Err(StoreError::VersionConflict { stored: 2 })
    ));
    let mut ghost = record("nope", "p1", 0);
    assert!(matches!(
        store.save_occasion(&mut ghost, 3, system(AuditAction::Analyzed)),
        Err(StoreError::NotFound(_))
    ));
    // Failed writes leave no audit trace.
    assert_eq!(store.audit_events(&"o1".into()).unwrap().len(), 2);
}

#[test]
fn concurrent_saves_with_same_expected_version() {
    let dir = tempfile::tempdir().unwrap();
    let store = Arc::new(RecordStore::open(dir.path()).unwrap());
    let mut rec = record("o1", "p1", 0);
    store.save_occasion(&mut rec, 0, upload_entry()).unwrap();
    for round in 0..20 {
        let barrier = Arc::new(Barrier::new(2));
        let expected = store.load_occasion(&"o1".into()).unwrap().version();
        let handles: Vec<_> = (0..2)
            .map(|i| {
                let store = store.clone();
                let barrier = barrier.clone();
                let mut rec = store.load_occasion(&"o1".into()).unwrap();
                std::thread::spawn(move || {
                    rec.idempotency_key = Some(format!("{round}-{i}"));
                    barrier.wait();
                    store.save_occasion(&mut rec, expected, system(AuditAction::Analyzed))
                })
            })
            .collect();
        let results: Vec<_> = handles.into_iter().map(|h| h.join().unwrap()).collect();
        let ok = results.iter().filter(|r| r.is_ok()).count();
        assert_eq!(ok, 1, "{results:?}");
        assert!(results.iter().any(|r| matches!(
            r,
            Err(StoreError::VersionConflict { stored }) if *stored == expected + 1
        )));
    }
}

#[test]
fn idempotency_key_is_unique() {
    let store = RecordStore::open_in_memory().unwrap();
    let mut a = record("o1", "p1", 0);
    a.idempotency_key = Some("k1".into());
    store.save_occasion(&mut a, 0, upload_entry()).unwrap();
    let mut b = record("o2", "p1", 0);
    b.idempotency_key = Some("k1".into());
    match store.save_occasion(&mut b, 0, upload_entry()) {
        Err(StoreError::DuplicateIdempotencyKey(id)) => assert_eq!(id.as_str(), "o1"),
        other => panic!("{other:?}"),
    }
    assert_eq!(
        store
            .find_by_idempotency_key("k1")
            .unwrap()
            .unwrap()
            .occasion
            .occasion_id,
        OccasionId::new("o1")
    );
    assert_eq!(store.count_occasions().unwrap(), 1);
}

#[test]
fn listing_order() {
    let store = RecordStore::open_in_memory().unwrap();
    assert!(store
        .list_occasions(&"ghost".into(), None)
        .unwrap()
        .is_empty());
    for (id, minutes) in [("b", 10), ("a", 10), ("c", 30), ("d", 0)] {
        let mut r = record(id, "p1", minutes);
        store.save_occasion(&mut r, 0, upload_entry()).unwrap();
    }
    let mut other = record("z", "p2", 99);
    store.save_occasion(&mut other, 0, upload_entry()).unwrap();
    let ids: Vec<_> = store
        .list_occasions(&"p1".into(), Some(&"study-1".into()))
        .unwrap()
        .into_iter()
        .map(|s| s.occasion_id.to_string())
        .collect();
    assert_eq!(ids, ["c", "a", "b", "d"]);
    assert!(store
        .list_occasions(&"p1".into(), Some(&"other-study".into()))
        .unwrap()
        .is_empty());
}

#[test]
fn audit_is_append_only_and_ordered() {
    let store = RecordStore::open_in_memory().unwrap();
    let ev = AuditEvent {
        seq: 0,
        occasion_id: "o1".into(),
        actor: AuditActor::System,
        action: AuditAction::Analyzed,
        payload: serde_json::json!({"n": 1}),
        at: t0(),
    };
    assert_eq!(store.append_audit(&ev).unwrap(), 1);
    let mut second = ev.clone();
    second.payload = serde_json::json!({"n": 2});
    second.at = t0() + Duration::seconds(1);
    assert_eq!(store.append_audit(&second).unwrap(), 2);
    let events = store.all_audit_events().unwrap();
    assert_eq!(events.iter().map(|e| e.seq).collect::<Vec<_>>(), [1, 2]);
    assert_eq!(events[1].payload["n"], 2);
    assert_eq!(events[1].at, second.at);
}

#[test]
fn record_and_audit_commit_together() {
    let dir = tempfile::tempdir().unwrap();
    let store = RecordStore::open(dir.path()).unwrap();
    let mut rec = record("o1", "p1", 0);
    store.save_occasion(&mut rec, 0, upload_entry()).unwrap();

    // Break the audit table behind the store's back: the next record write
    // must fail as a whole and leave the record untouched.
    let side = rusqlite::Connection::open(dir.path().join("records.sqlite3")).unwrap();
    side.execute_batch("ALTER TABLE audit RENAME TO audit_gone")
        .unwrap();
    rec.advance(LifecycleState::Analyzed, t0()).unwrap();
    assert!(matches!(
        store.save_occasion(&mut rec, 1, system(AuditAction::Analyzed)),
        Err(StoreError::Unavailable(_))
    ));
    side.execute_batch("ALTER TABLE audit_gone RENAME TO audit")
        .unwrap();
    let loaded = store.load_occasion(&"o1".into()).unwrap();
    assert_eq!(loaded.version(), 1);
    assert_eq!(loaded.state(), LifecycleState::Uploaded);
    assert_eq!(store.audit_events(&"o1".into()).unwrap().len(), 1);
}

#[test]
fn reopen_preserves_everything() {
    let dir = tempfile::tempdir().unwrap();
    let mut rec = record("o1", "p1", 0);
    {
        let store = RecordStore::open(dir.path()).unwrap();
        store.save_occasion(&mut rec, 0, upload_entry()).unwrap();
    }
    let store = RecordStore::open(dir.path()).unwrap();
    assert_eq!(store.load_occasion(&"o1".into()).unwrap(), rec);
    assert_eq!(store.audit_events(&"o1".into()).unwrap().len(), 1);
}

fn annotation(id: &str, x: i64) -> ResearcherAnnotation {
    ResearcherAnnotation {
        annotation_id: id.into(),
        initials: Initials::parse("JW").unwrap(),
        bbox: BoundingBox::new(x, 0, 5, 5),
        label: format!("food {x}"),
        food_code: None,
        energy_kcal: Some(x as f64 * 1.1),
        energy_source: None,
        created_at: t0(),
    }
}

#[test]
fn replay_reproduces_stored_state() {
    let store = RecordStore::open_in_memory().unwrap();
    let mut rec = record("o1", "p1", 0);
    store.save_occasion(&mut rec, 0, upload_entry()).unwrap();
    for (state, action) in [
        (LifecycleState::Analyzed, AuditAction::Analyzed),
        (
            LifecycleState::ParticipantReviewed,
            AuditAction::ReviewSubmitted,
        ),
        (LifecycleState::Refined, AuditAction::Refined),
    ] {
        let v = rec.version();
        rec.advance(state, t0()).unwrap();
        store.save_occasion(&mut rec, v, system(action)).unwrap();
    }
    let researcher = || AuditActor::Researcher(Initials::parse("JW").unwrap());
    for i in 0..5 {
        let v = rec.version();
        if i % 2 == 0 {
            rec.annotations.push(annotation(&format!("a{i}"), i));
            store
                .save_occasion(
                    &mut rec,
                    v,
                    AuditEntry::new(researcher(), AuditAction::AnnotationSaved, t0()),
                )
                .unwrap();
        } else {
            rec.annotations.remove(0);
            store
                .save_occasion(
                    &mut rec,
                    v,
                    AuditEntry::new(researcher(), AuditAction::AnnotationDeleted, t0()),
                )
                .unwrap();
        }
    }
    let events = store.audit_events(&"o1".into()).unwrap();
    let replayed = replay(&events).unwrap().unwrap();
    let stored = store.load_occasion(&"o1".into()).unwrap();
    assert_eq!(
        canonical::to_string(&replayed.annotations).unwrap(),
        canonical::to_string(&stored.annotations).unwrap()
    );
    assert_eq!(replayed, stored);
}

#[test]
fn replay_rejects_gaps_and_bad_transitions() {
    let store = RecordStore::open_in_memory().unwrap();
    let mut rec = record("o1", "p1", 0);
    store.save_occasion(&mut rec, 0, upload_entry()).unwrap();
    rec.advance(LifecycleState::Analyzed, t0()).unwrap();
    store
        .save_occasion(&mut rec, 1, system(AuditAction::Analyzed))
        .unwrap();
    let events = store.audit_events(&"o1".into()).unwrap();

    let mut gap = events.clone();
    gap.remove(0);
    assert!(replay(&gap).is_err());

    let mut wrong_action = events.clone();
    wrong_action[1].action = AuditAction::Refined;
    assert!(replay(&wrong_action).is_err());

    let mut reordered = events.clone();
    reordered.swap(0, 1);
    assert!(replay(&reordered).is_err());

    assert_eq!(replay(&[]).unwrap(), None);
}
