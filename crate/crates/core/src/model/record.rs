use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use super::{
    advance_state, ConfirmedFood, EatingOccasion, LifecycleError, LifecycleState,
    ParticipantReview, PredictedFood, ResearcherAnnotation,
};

/// Per-food energy breakdown with its total.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyEstimate {
    pub per_food: Vec<(String, f64)>,
    pub total_kcal: f64,
}

impl EnergyEstimate {
    pub fn from_parts(per_food: Vec<(String, f64)>) -> Self {
        let total_kcal = per_food.iter().map(|(_, k)| k).sum();
        Self {
            per_food,
            total_kcal,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateChange {
    pub state: LifecycleState,
    pub version: u64,
    pub at: DateTime<Utc>,
}

/// Everything stored for one occasion.
///
/// Participant-confirmed foods and researcher annotations live in separate
/// fields and are never merged.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OccasionRecord {
    pub occasion: EatingOccasion,
    #[serde(default)]
    pub predictions: Vec<PredictedFood>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub review: Option<ParticipantReview>,
    #[serde(default)]
    pub participant_confirmed: Vec<ConfirmedFood>,
    #[serde(default)]
    pub annotations: Vec<ResearcherAnnotation>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub energy_estimate: Option<EnergyEstimate>,
    #[serde(default)]
    pub history: Vec<StateChange>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub idempotency_key: Option<String>,
    /// File name the before image was uploaded under, used for sidecar
    /// lookups when analysis runs later than the upload.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub before_file_name: Option<String>,
}

impl OccasionRecord {
    /// A freshly uploaded record. Version 0 means "not yet stored"; the store
    /// assigns version 1 on create.
    pub fn new_uploaded(mut occasion: EatingOccasion, at: DateTime<Utc>) -> Self {
        occasion.state = LifecycleState::Uploaded;
        occasion.version = 0;
        Self {
            history: vec![StateChange {
                state: LifecycleState::Uploaded,
                version: 1,
                at,
            }],
            occasion,
            predictions: Vec::new(),
            review: None,
            participant_confirmed: Vec::new(),
            annotations: Vec::new(),
            energy_estimate: None,
            idempotency_key: None,
            before_file_name: None,
        }
    }

    pub fn state(&self) -> LifecycleState {
        self.occasion.state
    }

    pub fn version(&self) -> u64 {
        self.occasion.version
    }

    /// Advances the lifecycle and records the change in the history.
    pub fn advance(
        &mut self,
        target: LifecycleState,
        at: DateTime<Utc>,
    ) -> Result<(), LifecycleError> {
        self.occasion = advance_state(&self.occasion, target)?;
        self.history.push(StateChange {
            state: target,
            version: self.occasion.version,
            at,
        });
        Ok(())
    }
}
