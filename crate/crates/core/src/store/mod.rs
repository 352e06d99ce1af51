//! Persistence: a content-addressed blob directory for images and a
//! single-file SQLite store for occasion records and the audit trail.
//!
//! On-disk layout under the configured roots:
//!
//! ```text
//! blobs/<first 2 hash chars>/<hash>
//! data/records.sqlite3
//! ```
//!
//! Backup is a copy of both directories taken while the server is stopped.

mod audit;
mod blob;
mod records;

use thiserror::Error;

use crate::model::OccasionId;

pub use audit::{replay, AuditAction, AuditActor, AuditEntry, AuditEvent, ReplayError};
pub use blob::{BlobRef, BlobStore};
pub use records::{OccasionSummary, RecordStore};

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("not found: {0}")]
    NotFound(String),
    #[error("version conflict: stored version is {stored}")]
    VersionConflict { stored: u64 },
    #[error("idempotency key already used by occasion {0}")]
    DuplicateIdempotencyKey(OccasionId),
    #[error("stored data is corrupt: {0}")]
    Corrupt(String),
    #[error("store unavailable: {0}")]
    Unavailable(String),
}

impl From<rusqlite::Error> for StoreError {
    fn from(e: rusqlite::Error) -> Self {
        StoreError::Unavailable(e.to_string())
    }
}

impl From<std::io::Error> for StoreError {
    fn from(e: std::io::Error) -> Self {
        StoreError::Unavailable(e.to_string())
    }
}

impl From<serde_json::Error> for StoreError {
    fn from(e: serde_json::Error) -> Self {
        StoreError::Corrupt(e.to_string())
    }
}
