use std::collections::HashSet;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{FieldViolation, ImageCapture, PinLocation, PredictionId};
use crate::food::FoodCode;

/// One server-side guess: a label anchored at a pin on the before image.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictedFood {
    pub prediction_id: PredictionId,
    pub label: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub food_code: Option<FoodCode>,
    pub pin: PinLocation,
    pub confidence: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Verdict {
    Confirmed,
    Relabeled { label: String },
    Removed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerdictEntry {
    pub prediction_id: PredictionId,
    pub verdict: Verdict,
}

/// A food the participant adds that the server did not predict.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Addition {
    pub label: String,
    pub pin: PinLocation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParticipantReview {
    #[serde(default)]
    pub verdicts: Vec<VerdictEntry>,
    #[serde(default)]
    pub additions: Vec<Addition>,
    pub submitted_at: DateTime<Utc>,
}

/// A participant-confirmed food: the label the participant stands behind,
/// at the pin they confirmed or placed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfirmedFood {
    pub label: String,
    pub pin: PinLocation,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ReviewError {
    #[error("verdict references unknown prediction {0}")]
    UnknownPrediction(PredictionId),
    #[error("more than one verdict for prediction {0}")]
    DuplicateVerdict(PredictionId),
}

impl ParticipantReview {
    /// Full validation against the predictions and the before image:
    /// reference integrity, non-empty labels and in-bounds pins.
    pub fn violations(
        &self,
        predictions: &[PredictedFood],
        before: &ImageCapture,
    ) -> Vec<FieldViolation> {
        let mut out = Vec::new();
        if let Err(e) = check_references(predictions, self) {
            let idx = self
                .verdicts
                .iter()
                .position(|v| match &e {
                    ReviewError::UnknownPrediction(id) | ReviewError::DuplicateVerdict(id) => {
                        &v.prediction_id == id
                    }
                })
                .unwrap_or(0);
            out.push(FieldViolation::new(
                format!("verdicts[{idx}].prediction_id"),
                e.to_string(),
            ));
        }
        for (i, v) in self.verdicts.iter().enumerate() {
            if let Verdict::Relabeled { label } = &v.verdict {
                if label.trim().is_empty() {
                    out.push(FieldViolation::new(
                        format!("verdicts[{i}].verdict.label"),
                        "label must not be empty",
                    ));
                }
            }
        }
        for (i, a) in self.additions.iter().enumerate() {
            if a.label.trim().is_empty() {
                out.push(FieldViolation::new(
                    format!("additions[{i}].label"),
                    "label must not be empty",
                ));
            }
            if !a.pin.is_inside(before.width_px, before.height_px) {
                out.push(FieldViolation::new(
                    format!("additions[{i}].pin"),
                    format!(
                        "({}, {}) is outside the {}x{} before image",
                        a.pin.x_px, a.pin.y_px, before.width_px, before.height_px
                    ),
                ));
            }
        }
        out
    }
}

fn check_references(
    predictions: &[PredictedFood],
    review: &ParticipantReview,
) -> Result<(), ReviewError> {
    let known: HashSet<&PredictionId> = predictions.iter().map(|p| &p.prediction_id).collect();
    let mut seen = HashSet::new();
    for v in &review.verdicts {
        if !known.contains(&v.prediction_id) {
            return Err(ReviewError::UnknownPrediction(v.prediction_id.clone()));
        }
        if !seen.insert(&v.prediction_id) {
            return Err(ReviewError::DuplicateVerdict(v.prediction_id.clone()));
        }
    }
    Ok(())
}

/// Applies a participant review to the server predictions.
///
/// Confirmed predictions keep their label, relabeled ones take the new label,
/// removed ones (and predictions the review does not mention) are dropped.
/// Predictions come first in their original order, then additions in the
/// order submitted.
pub fn merge_review(
    predictions: &[PredictedFood],
    review: &ParticipantReview,
) -> Result<Vec<ConfirmedFood>, ReviewError> {
    check_references(predictions, review)?;
    let mut out = Vec::with_capacity(predictions.len() + review.additions.len());
    for p in predictions {
        let verdict = review
            .verdicts
            .iter()
            .find(|v| v.prediction_id == p.prediction_id)
            .map(|v| &v.verdict);
        match verdict {
            Some(Verdict::Confirmed) => out.push(ConfirmedFood {
                label: p.label.clone(),
                pin: p.pin,
            }),
            Some(Verdict::Relabeled { label }) => out.push(ConfirmedFood {
                label: label.clone(),
                pin: p.pin,
            }),
            Some(Verdict::Removed) | None => {}
        }
    }
    out.extend(review.additions.iter().map(|a| ConfirmedFood {
        label: a.label.clone(),
        pin: a.pin,
    }));
    Ok(out)
}
