//! The local state file: session settings, the upload queue and the cached
//! food list.
//!
//! `<state-dir>/session.json` is only read or written while holding an
//! exclusive lock on `<state-dir>/session.lock`, so concurrent invocations
//! run one after the other.

use std::fs::{self, File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use foodrec_core::{CaptureMetadata, FoodDatabase, FoodItem, OccasionId};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

pub const STATE_FILE: &str = "session.json";
pub const LOCK_FILE: &str = "session.lock";

/// A captured pair waiting to be uploaded.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Draft {
    pub draft_id: String,
    /// Sent with every upload attempt of this draft, so a retry after a
    /// lost response finds the occasion created by the first attempt.
    pub idempotency_key: String,
    pub before_path: PathBuf,
    pub after_path: PathBuf,
    pub metadata: CaptureMetadata,
    pub captured_at_from_mtime: bool,
    pub queued_at: DateTime<Utc>,
    /// Outcome of the most recent failed upload attempt.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub last_error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UploadedDraft {
    pub draft_id: String,
    pub occasion_id: OccasionId,
    pub uploaded_at: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CachedFoodList {
    pub hash: String,
    pub items: Vec<FoodItem>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SessionState {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub server_url: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub participant_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub study_id: Option<String>,
    #[serde(default)]
    pub queue: Vec<Draft>,
    #[serde(default)]
    pub uploaded: Vec<UploadedDraft>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub food_list: Option<CachedFoodList>,
}

impl SessionState {
    pub fn food_database(&self) -> Option<FoodDatabase> {
        let cached = self.food_list.as_ref()?;
        FoodDatabase::from_items(cached.items.clone()).ok()
    }
}

/// The session state together with the lock that guards it. The lock is
/// released on drop.
#[derive(Debug)]
pub struct Session {
    dir: PathBuf,
    _lock: File,
    pub state: SessionState,
}

impl Session {
    /// Creates the directory if needed, waits for the lock and reads the
    /// state (empty when there is no state file yet).
    pub fn open(dir: &Path) -> Result<Session, CliError> {
        fs::create_dir_all(dir).map_err(|e| {
            CliError::Local(format!(
                "cannot create state directory {}: {e}",
                dir.display()
            ))
        })?;
        let lock = OpenOptions::new()
            .create(true)
            .truncate(false)
            .write(true)
            .open(dir.join(LOCK_FILE))?;
        lock.lock()?;
        let path = dir.join(STATE_FILE);
        let state = match fs::read(&path) {
            Ok(bytes) => serde_json::from_slice(&bytes).map_err(|e| {
                CliError::Local(format!("state file {} is corrupt: {e}", path.display()))
            })?,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => SessionState::default(),
            Err(e) => return Err(e.into()),
        };
        Ok(Session {
            dir: dir.to_owned(),
            _lock: lock,
            state,
        })
    }

    /// Writes the state through a temporary file and a rename, so a crash
    /// leaves either the old or the new file.
    pub fn save(&self) -> Result<(), CliError> {
        let tmp = self.dir.join(format!("{STATE_FILE}.tmp"));
        let mut f = File::create(&tmp)?;
        f.write_all(&serde_json::to_vec_pretty(&self.state).expect("state serializes"))?;
        f.sync_all()?;
        fs::rename(&tmp, self.dir.join(STATE_FILE))?;
        Ok(())
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }
}
