use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{CaptureMetadata, ImageCapture, OccasionId, ParticipantId, StudyId};

/// Stored position of an occasion in the upload/analysis/review pipeline.
///
/// Upload creates `Uploaded`; server analysis moves to `Analyzed`, and
/// fetching the predictions is a read in that state. The participant's
/// review gives `ParticipantReviewed`, server refinement gives `Refined`,
/// and the researcher's finish after annotation gives `Finalized`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum LifecycleState {
    Uploaded,
    Analyzed,
    ParticipantReviewed,
    Refined,
    Finalized,
}

impl LifecycleState {
    pub const ALL: [LifecycleState; 5] = [
        LifecycleState::Uploaded,
        LifecycleState::Analyzed,
        LifecycleState::ParticipantReviewed,
        LifecycleState::Refined,
        LifecycleState::Finalized,
    ];

    pub fn successor(self) -> Option<LifecycleState> {
        match self {
            LifecycleState::Uploaded => Some(LifecycleState::Analyzed),
            LifecycleState::Analyzed => Some(LifecycleState::ParticipantReviewed),
            LifecycleState::ParticipantReviewed => Some(LifecycleState::Refined),
            LifecycleState::Refined => Some(LifecycleState::Finalized),
            LifecycleState::Finalized => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            LifecycleState::Uploaded => "Uploaded",
            LifecycleState::Analyzed => "Analyzed",
            LifecycleState::ParticipantReviewed => "ParticipantReviewed",
            LifecycleState::Refined => "Refined",
            LifecycleState::Finalized => "Finalized",
        }
    }
}

impl fmt::Display for LifecycleState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for LifecycleState {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        LifecycleState::ALL
            .into_iter()
            .find(|st| st.as_str() == s)
            .ok_or_else(|| format!("unknown lifecycle state {s:?}"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EatingOccasion {
    pub occasion_id: OccasionId,
    pub participant_id: ParticipantId,
    pub study_id: StudyId,
    pub before: ImageCapture,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub after: Option<ImageCapture>,
    pub metadata: CaptureMetadata,
    pub state: LifecycleState,
    pub version: u64,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LifecycleError {
    #[error("illegal transition from {from} to {to}")]
    IllegalTransition {
        from: LifecycleState,
        to: LifecycleState,
    },
    #[error("occasion has no after image; it cannot leave Uploaded")]
    MissingAfterImage,
}

/// Moves `occasion` to `target`, which must be the immediate successor of
/// its current state. The returned occasion's version is one higher.
pub fn advance_state(
    occasion: &EatingOccasion,
    target: LifecycleState,
) -> Result<EatingOccasion, LifecycleError> {
    if occasion.state.successor() != Some(target) {
        return Err(LifecycleError::IllegalTransition {
            from: occasion.state,
            to: target,
        });
    }
    if occasion.after.is_none() {
        return Err(LifecycleError::MissingAfterImage);
    }
    let mut next = occasion.clone();
    next.state = target;
    next.version = occasion.version + 1;
    Ok(next)
}
