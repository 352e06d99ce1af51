use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{Initials, LifecycleState, OccasionId, OccasionRecord, ParticipantId};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AuditActor {
    Participant(ParticipantId),
    Researcher(Initials),
    System,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AuditAction {
    Uploaded,
    Analyzed,
    ReviewSubmitted,
    Refined,
    AnnotationSaved,
    AnnotationDeleted,
    Finalized,
}

impl AuditAction {
    pub fn as_str(self) -> &'static str {
        match self {
            AuditAction::Uploaded => "Uploaded",
            AuditAction::Analyzed => "Analyzed",
            AuditAction::ReviewSubmitted => "ReviewSubmitted",
            AuditAction::Refined => "Refined",
            AuditAction::AnnotationSaved => "AnnotationSaved",
            AuditAction::AnnotationDeleted => "AnnotationDeleted",
            AuditAction::Finalized => "Finalized",
        }
    }

    /// The lifecycle state an action leaves the occasion in, for actions
    /// that move it. Annotation edits keep the state.
    pub fn resulting_state(self) -> Option<LifecycleState> {
        match self {
            AuditAction::Uploaded => Some(LifecycleState::Uploaded),
            AuditAction::Analyzed => Some(LifecycleState::Analyzed),
            AuditAction::ReviewSubmitted => Some(LifecycleState::ParticipantReviewed),
            AuditAction::Refined => Some(LifecycleState::Refined),
            AuditAction::Finalized => Some(LifecycleState::Finalized),
            AuditAction::AnnotationSaved | AuditAction::AnnotationDeleted => None,
        }
    }
}

impl std::str::FromStr for AuditAction {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        use AuditAction::*;
        [
            Uploaded,
            Analyzed,
            ReviewSubmitted,
            Refined,
            AnnotationSaved,
            AnnotationDeleted,
            Finalized,
        ]
        .into_iter()
        .find(|a| a.as_str() == s)
        .ok_or_else(|| format!("unknown audit action {s:?}"))
    }
}

/// Who did what, passed alongside a record write.
#[derive(Debug, Clone, PartialEq)]
pub struct AuditEntry {
    pub actor: AuditActor,
    pub action: AuditAction,
    pub at: DateTime<Utc>,
}

impl AuditEntry {
    pub fn new(actor: AuditActor, action: AuditAction, at: DateTime<Utc>) -> Self {
        Self { actor, action, at }
    }
}

/// An immutable audit-trail entry. The payload is a canonical-JSON snapshot
/// of the whole occasion record as it was after the action.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditEvent {
    pub seq: u64,
    pub occasion_id: OccasionId,
    pub actor: AuditActor,
    pub action: AuditAction,
    pub payload: serde_json::Value,
    pub at: DateTime<Utc>,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ReplayError {
    #[error("event {seq}: sequence numbers must increase")]
    SeqOrder { seq: u64 },
    #[error("event {seq}: belongs to a different occasion")]
    MixedOccasions { seq: u64 },
    #[error("event {seq}: payload does not decode: {reason}")]
    BadPayload { seq: u64, reason: String },
    #[error("event {seq}: version {found} follows {previous}")]
    VersionGap { seq: u64, previous: u64, found: u64 },
    #[error("event {seq}: {action} cannot move {from} to {to}")]
    BadTransition {
        seq: u64,
        action: &'static str,
        from: LifecycleState,
        to: LifecycleState,
    },
    #[error("event {seq}: occasion was already finalized")]
    AfterFinalize { seq: u64 },
}

/// Folds an occasion's audit events into the record they describe, checking
/// the trail along the way: one occasion, increasing seq, versions 1..n
/// without gaps, and state changes that match each action and follow the
/// lifecycle order.
pub fn replay(events: &[AuditEvent]) -> Result<Option<OccasionRecord>, ReplayError> {
    let mut current: Option<OccasionRecord> = None;
    let mut last_seq = 0;
    for ev in events {
        if ev.seq <= last_seq {
            return Err(ReplayError::SeqOrder { seq: ev.seq });
        }
        last_seq = ev.seq;
        let next: OccasionRecord =
            serde_json::from_value(ev.payload.clone()).map_err(|e| ReplayError::BadPayload {
                seq: ev.seq,
                reason: e.to_string(),
            })?;
        if next.occasion.occasion_id != ev.occasion_id {
            return Err(ReplayError::MixedOccasions { seq: ev.seq });
        }
        let (prev_version, prev_state) = match &current {
            None => (0, None),
            Some(rec) => {
                if rec.occasion.occasion_id != ev.occasion_id {
                    return Err(ReplayError::MixedOccasions { seq: ev.seq });
                }
                if rec.state() == LifecycleState::Finalized {
                    return Err(ReplayError::AfterFinalize { seq: ev.seq });
                }
                (rec.version(), Some(rec.state()))
            }
        };
        if next.version() != prev_version + 1 {
            return Err(ReplayError::VersionGap {
                seq: ev.seq,
                previous: prev_version,
                found: next.version(),
            });
        }
        let legal = match (prev_state, ev.action.resulting_state()) {
            (None, Some(LifecycleState::Uploaded)) => next.state() == LifecycleState::Uploaded,
            (Some(from), Some(to)) => from.successor() == Some(to) && next.state() == to,
            (Some(from), None) => next.state() == from && from == LifecycleState::Refined,
            _ => false,
        };
        if !legal {
            return Err(ReplayError::BadTransition {
                seq: ev.seq,
                action: ev.action.as_str(),
                from: prev_state.unwrap_or(LifecycleState::Uploaded),
                to: next.state(),
            });
        }
        current = Some(next);
    }
    Ok(current)
}
