use std::fmt;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{AnnotationId, BoundingBox};
use crate::food::FoodCode;

/// Author initials: one to four uppercase ASCII letters.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Initials(String);

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("initials must be 1-4 uppercase letters, got {0:?}")]
pub struct InitialsError(pub String);

impl Initials {
    /// Initials carried by drafts the server generates during refinement.
    pub fn system() -> Self {
        Initials("SYS".to_owned())
    }

    pub fn parse(s: &str) -> Result<Self, InitialsError> {
        if (1..=4).contains(&s.len()) && s.bytes().all(|b| b.is_ascii_uppercase()) {
            Ok(Initials(s.to_owned()))
        } else {
            Err(InitialsError(s.to_owned()))
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl TryFrom<String> for Initials {
    type Error = InitialsError;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        Initials::parse(&s)
    }
}

impl From<Initials> for String {
    fn from(i: Initials) -> Self {
        i.0
    }
}

impl fmt::Display for Initials {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Where an annotation's energy value came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnergySource {
    /// Pre-filled by the portion estimator.
    Estimated,
    /// Typed in by a researcher.
    Manual,
}

/// A researcher-confirmed food region with its nutrition label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResearcherAnnotation {
    pub annotation_id: AnnotationId,
    pub initials: Initials,
    #[serde(rename = "box")]
    pub bbox: BoundingBox,
    pub label: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub food_code: Option<FoodCode>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub energy_kcal: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub energy_source: Option<EnergySource>,
    pub created_at: DateTime<Utc>,
}

impl ResearcherAnnotation {
    /// Same region, label, code and energy; ignores id, author and time.
    pub fn same_content(&self, other: &ResearcherAnnotation) -> bool {
        self.bbox == other.bbox
            && self.label == other.label
            && self.food_code == other.food_code
            && self.energy_kcal == other.energy_kcal
            && self.energy_source == other.energy_source
    }
}
