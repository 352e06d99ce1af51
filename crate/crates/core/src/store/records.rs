use std::path::Path;
use std::sync::Mutex;

use chrono::{DateTime, Utc};
use rusqlite::{params, Connection, OptionalExtension, TransactionBehavior};
use serde::{Deserialize, Serialize};

use super::{AuditEntry, AuditEvent, BlobRef, StoreError};
use crate::canonical;
use crate::model::{LifecycleState, OccasionId, OccasionRecord, ParticipantId, StudyId};

const SCHEMA: &str = "
CREATE TABLE IF NOT EXISTS occasions (
    occasion_id     TEXT PRIMARY KEY,
    participant_id  TEXT NOT NULL,
    study_id        TEXT NOT NULL,
    state           TEXT NOT NULL,
    version         INTEGER NOT NULL,
    idempotency_key TEXT UNIQUE,
    record          TEXT NOT NULL
);
CREATE INDEX IF NOT EXISTS occasions_by_participant ON occasions (participant_id, study_id);
CREATE INDEX IF NOT EXISTS occasions_by_study ON occasions (study_id);
CREATE TABLE IF NOT EXISTS audit (
    seq         INTEGER PRIMARY KEY AUTOINCREMENT,
    occasion_id TEXT NOT NULL,
    actor       TEXT NOT NULL,
    action      TEXT NOT NULL,
    payload     TEXT NOT NULL,
    at          TEXT NOT NULL
);
CREATE INDEX IF NOT EXISTS audit_by_occasion ON audit (occasion_id, seq);
";

/// Preview row for the per-participant occasion grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OccasionSummary {
    pub occasion_id: OccasionId,
    pub participant_id: ParticipantId,
    pub study_id: StudyId,
    pub state: LifecycleState,
    pub version: u64,
    pub captured_at: DateTime<Utc>,
    pub before: BlobRef,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub after: Option<BlobRef>,
}

impl From<&OccasionRecord> for OccasionSummary {
    fn from(r: &OccasionRecord) -> Self {
        let o = &r.occasion;
        OccasionSummary {
            occasion_id: o.occasion_id.clone(),
            participant_id: o.participant_id.clone(),
            study_id: o.study_id.clone(),
            state: o.state,
            version: o.version,
            captured_at: o.metadata.captured_at,
            before: BlobRef::from(&o.before),
            after: o.after.as_ref().map(BlobRef::from),
        }
    }
}

/// Occasion records with compare-and-set versioning, plus the append-only
/// audit trail. Each record write and its audit event commit in one
/// transaction.
///
/// The handle is `Send + Sync`; writes are serialized internally.
#[derive(Debug)]
pub struct RecordStore {
    conn: Mutex<Connection>,
}

impl RecordStore {
    /// Opens (creating if needed) `<dir>/records.sqlite3`.
    pub fn open(dir: impl AsRef<Path>) -> Result<Self, StoreError> {
        std::fs::create_dir_all(dir.as_ref())?;
        let conn = Connection::open(dir.as_ref().join("records.sqlite3"))?;
        conn.pragma_update(None, "journal_mode", "WAL")?;
        conn.pragma_update(None, "synchronous", "FULL")?;
        Self::init(conn)
    }

    pub fn open_in_memory() -> Result<Self, StoreError> {
        Self::init(Connection::open_in_memory()?)
    }

    fn init(conn: Connection) -> Result<Self, StoreError> {
        conn.execute_batch(SCHEMA)?;
        Ok(Self {
            conn: Mutex::new(conn),
        })
    }

    fn conn(&self) -> std::sync::MutexGuard<'_, Connection> {
        // A panic mid-transaction rolls the transaction back on drop, so the
        // connection is still consistent.
        self.conn.lock().unwrap_or_else(|p| p.into_inner())
    }

    /// Compare-and-set write. `expected_version` must equal the stored
    /// version, or 0 to create. On success the record's version is set to
    /// `expected_version + 1`, the audit event is appended in the same
    /// transaction and the new version is returned.
    pub fn save_occasion(
        &self,
        record: &mut OccasionRecord,
        expected_version: u64,
        audit: AuditEntry,
    ) -> Result<u64, StoreError> {
        let mut conn = self.conn();
        let tx = conn.transaction_with_behavior(TransactionBehavior::Immediate)?;
        let id = record.occasion.occasion_id.clone();
        let stored: Option<u64> = tx
            .query_row(
                "SELECT version FROM occasions WHERE occasion_id = ?1",
                [id.as_str()],
                |row| row.get(0),
            )
            .optional()?;
        match (stored, expected_version) {
            (None, 0) => {}
            (None, _) => return Err(StoreError::NotFound(id.to_string())),
            (Some(v), e) if v != e => return Err(StoreError::VersionConflict { stored: v }),
            (Some(_), _) => {}
        }
        if expected_version == 0 {
            if let Some(key) = &record.idempotency_key {
                let existing: Option<String> = tx
                    .query_row(
                        "SELECT occasion_id FROM occasions WHERE idempotency_key = ?1",
                        [key],
                        |row| row.get(0),
                    )
                    .optional()?;
                if let Some(existing) = existing {
                    return Err(StoreError::DuplicateIdempotencyKey(existing.into()));
                }
            }
        }
        let new_version = expected_version + 1;
        record.occasion.version = new_version;
        let payload = canonical::to_string(record)?;
        if expected_version == 0 {
            tx.execute(
                "INSERT INTO occasions (occasion_id, participant_id, study_id, state, version, idempotency_key, record)
                 VALUES (?1, ?2, ?3, ?4, ?5, ?6, ?7)",
                params![
                    id.as_str(),
                    record.occasion.participant_id.as_str(),
                    record.occasion.study_id.as_str(),
                    record.state().as_str(),
                    new_version,
                    record.idempotency_key,
                    payload
                ],
            )?;
        } else {
            tx.execute(
                "UPDATE occasions SET state = ?2, version = ?3, record = ?4 WHERE occasion_id = ?1",
                params![id.as_str(), record.state().as_str(), new_version, payload],
            )?;
        }
        tx.execute(
            "INSERT INTO audit (occasion_id, actor, action, payload, at) VALUES (?1, ?2, ?3, ?4, ?5)",
            params![
                id.as_str(),
                canonical::to_string(&audit.actor)?,
                audit.action.as_str(),
                payload,
                audit.at.to_rfc3339_opts(chrono::SecondsFormat::AutoSi, true)
            ],
        )?;
        tx.commit()?;
        Ok(new_version)
    }

    /// Appends a free-standing audit event and returns its seq. The event's
    /// own `seq` is ignored; the store assigns the next one.
    pub fn append_audit(&self, event: &AuditEvent) -> Result<u64, StoreError> {
        let conn = self.conn();
        conn.execute(
            "INSERT INTO audit (occasion_id, actor, action, payload, at) VALUES (?1, ?2, ?3, ?4, ?5)",
            params![
                event.occasion_id.as_str(),
                canonical::to_string(&event.actor)?,
                event.action.as_str(),
                canonical::to_string(&event.payload)?,
                event.at.to_rfc3339_opts(chrono::SecondsFormat::AutoSi, true)
            ],
        )?;
        Ok(conn.last_insert_rowid() as u64)
    }

    pub fn load_occasion(&self, id: &OccasionId) -> Result<OccasionRecord, StoreError> {
        let text: Option<String> = self
            .conn()
            .query_row(
                "SELECT record FROM occasions WHERE occasion_id = ?1",
                [id.as_str()],
                |row| row.get(0),
            )
            .optional()?;
        let text = text.ok_or_else(|| StoreError::NotFound(id.to_string()))?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn find_by_idempotency_key(&self, key: &str) -> Result<Option<OccasionRecord>, StoreError> {
        let text: Option<String> = self
            .conn()
            .query_row(
                "SELECT record FROM occasions WHERE idempotency_key = ?1",
                [key],
                |row| row.get(0),
            )
            .optional()?;
        Ok(text.map(|t| serde_json::from_str(&t)).transpose()?)
    }

    fn records_where(
        &self,
        sql: &str,
        args: &[&dyn rusqlite::ToSql],
    ) -> Result<Vec<OccasionRecord>, StoreError> {
        let conn = self.conn();
        let mut stmt = conn.prepare(sql)?;
        let rows = stmt.query_map(args, |row| row.get::<_, String>(0))?;
        let mut out = Vec::new();
        for text in rows {
            out.push(serde_json::from_str(&text?)?);
        }
        Ok(out)
    }

    /// Summaries for one participant, newest capture first; equal capture
    /// times are ordered by occasion id ascending. `study_id` narrows the
    /// listing when given.
    pub fn list_occasions(
        &self,
        participant_id: &ParticipantId,
        study_id: Option<&StudyId>,
    ) -> Result<Vec<OccasionSummary>, StoreError> {
        let records = match study_id {
            Some(s) => self.records_where(
                "SELECT record FROM occasions WHERE participant_id = ?1 AND study_id = ?2",
                &[&participant_id.as_str(), &s.as_str()],
            )?,
            None => self.records_where(
                "SELECT record FROM occasions WHERE participant_id = ?1",
                &[&participant_id.as_str()],
            )?,
        };
        let mut out: Vec<OccasionSummary> = records.iter().map(OccasionSummary::from).collect();
        out.sort_by(|a, b| {
            b.captured_at
                .cmp(&a.captured_at)
                .then_with(|| a.occasion_id.cmp(&b.occasion_id))
        });
        Ok(out)
    }

    /// All records of a study, ordered by occasion id.
    pub fn occasions_in_study(
        &self,
        study_id: &StudyId,
    ) -> Result<Vec<OccasionRecord>, StoreError> {
        self.records_where(
            "SELECT record FROM occasions WHERE study_id = ?1 ORDER BY occasion_id",
            &[&study_id.as_str()],
        )
    }

    pub fn occasion_ids_in_state(
        &self,
        state: LifecycleState,
    ) -> Result<Vec<OccasionId>, StoreError> {
        let conn = self.conn();
        let mut stmt = conn
            .prepare("SELECT occasion_id FROM occasions WHERE state = ?1 ORDER BY occasion_id")?;
        let ids = stmt
            .query_map([state.as_str()], |row| row.get::<_, String>(0))?
            .map(|r| r.map(OccasionId::from))
            .collect::<Result<_, _>>()?;
        Ok(ids)
    }

    pub fn count_occasions(&self) -> Result<u64, StoreError> {
        Ok(self
            .conn()
            .query_row("SELECT COUNT(*) FROM occasions", [], |row| row.get(0))?)
    }

    pub fn study_exists(&self, study_id: &StudyId) -> Result<bool, StoreError> {
        Ok(self.conn().query_row(
            "SELECT EXISTS (SELECT 1 FROM occasions WHERE study_id = ?1)",
            [study_id.as_str()],
            |row| row.get(0),
        )?)
    }

    /// Audit events of one occasion in insertion order.
    pub fn audit_events(&self, occasion_id: &OccasionId) -> Result<Vec<AuditEvent>, StoreError> {
        self.events_where(
            "SELECT seq, occasion_id, actor, action, payload, at FROM audit WHERE occasion_id = ?1 ORDER BY seq",
            &[&occasion_id.as_str()],
        )
    }

    pub fn all_audit_events(&self) -> Result<Vec<AuditEvent>, StoreError> {
        self.events_where(
            "SELECT seq, occasion_id, actor, action, payload, at FROM audit ORDER BY seq",
            &[],
        )
    }

    fn events_where(
        &self,
        sql: &str,
        args: &[&dyn rusqlite::ToSql],
    ) -> Result<Vec<AuditEvent>, StoreError> {
        let conn = self.conn();
        let mut stmt = conn.prepare(sql)?;
        let rows = stmt.query_map(args, |row| {
            Ok((
                row.get::<_, u64>(0)?,
                row.get::<_, String>(1)?,
                row.get::<_, String>(2)?,
                row.get::<_, String>(3)?,
                row.get::<_, String>(4)?,
                row.get::<_, String>(5)?,
            ))
        })?;
        let mut out = Vec::new();
        for row in rows {
            let (seq, occasion_id, actor, action, payload, at) = row?;
            out.push(AuditEvent {
                seq,
                occasion_id: occasion_id.into(),
                actor: serde_json::from_str(&actor)?,
                action: action.parse().map_err(StoreError::Corrupt)?,
                payload: serde_json::from_str(&payload)?,
                at: DateTime::parse_from_rfc3339(&at)
                    .map_err(|e| StoreError::Corrupt(e.to_string()))?
                    .with_timezone(&Utc),
            });
        }
        Ok(out)
    }
}
