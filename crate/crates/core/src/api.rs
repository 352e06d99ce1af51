//! Request and response bodies of the `/api/v1` HTTP interface, shared by
//! the server and its clients. Field names are the wire names.

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::food::{FoodCode, FoodItem};
use crate::model::{
    Addition, AnnotationId, BoundingBox, CaptureMetadata, ConfirmedFood, EnergyEstimate,
    EnergySource, ImageCapture, LifecycleState, OccasionId, ParticipantId, ParticipantReview,
    PredictedFood, ResearcherAnnotation, StateChange, StudyId, VerdictEntry,
};
use crate::store::AuditEvent;

pub const API_PREFIX: &str = "/api/v1";
pub const IDEMPOTENCY_HEADER: &str = "Idempotency-Key";
pub const DEFAULT_SEARCH_LIMIT: usize = 25;
pub const EXPORT_SCHEMA_VERSION: &str = "1";

/// Multipart part names of an upload.
pub mod upload_parts {
    pub const PARTICIPANT_ID: &str = "participant_id";
    pub const STUDY_ID: &str = "study_id";
    pub const METADATA: &str = "metadata";
    pub const BEFORE: &str = "before";
    pub const AFTER: &str = "after";
}

/// Error body of every failed request.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub status: u16,
    pub code: String,
    pub message: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub details: Option<serde_json::Value>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnalysisStatus {
    Completed,
    Scheduled,
    Deferred,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub status: AnalysisStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<ErrorBody>,
}

/// Reply to an upload. `state` and `version` describe the stored upload;
/// `analysis` says what has happened to analysis so far.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UploadResponse {
    pub occasion_id: OccasionId,
    pub state: LifecycleState,
    pub version: u64,
    /// True when the idempotency key matched an earlier upload and nothing
    /// new was stored.
    #[serde(default)]
    pub duplicate: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub analysis: Option<AnalysisReport>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PredictionStatus {
    Pending,
    Ready,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionsResponse {
    pub occasion_id: OccasionId,
    pub state: LifecycleState,
    pub version: u64,
    pub status: PredictionStatus,
    pub predictions: Vec<PredictedFood>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReviewRequest {
    #[serde(default)]
    pub verdicts: Vec<VerdictEntry>,
    #[serde(default)]
    pub additions: Vec<Addition>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub submitted_at: Option<DateTime<Utc>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReviewResponse {
    pub occasion_id: OccasionId,
    pub state: LifecycleState,
    pub version: u64,
    pub confirmed: Vec<ConfirmedFood>,
    pub annotations: Vec<ResearcherAnnotation>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageView {
    #[serde(flatten)]
    pub capture: ImageCapture,
    pub url: String,
    pub thumbnail_url: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParticipantSection {
    pub predictions: Vec<PredictedFood>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub review: Option<ParticipantReview>,
    pub confirmed: Vec<ConfirmedFood>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResearcherSection {
    pub annotations: Vec<ResearcherAnnotation>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub energy_estimate: Option<EnergyEstimate>,
}

/// Everything known about one occasion, with the participant's and the
/// researchers' results in separate sections.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OccasionDetail {
    pub occasion_id: OccasionId,
    pub participant_id: ParticipantId,
    pub study_id: StudyId,
    pub state: LifecycleState,
    pub version: u64,
    pub finalized: bool,
    pub metadata: CaptureMetadata,
    pub before: ImageView,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub after: Option<ImageView>,
    pub participant: ParticipantSection,
    pub researcher: ResearcherSection,
    pub history: Vec<StateChange>,
}

/// One annotation of a whole-set save. Without an id a new annotation is
/// created. Without a food code the label is resolved against the food
/// list. Author and timestamp are assigned by the server.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotationInput {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub annotation_id: Option<AnnotationId>,
    #[serde(rename = "box")]
    pub bbox: BoundingBox,
    pub label: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub food_code: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub energy_kcal: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub energy_source: Option<EnergySource>,
}

impl From<&ResearcherAnnotation> for AnnotationInput {
    fn from(a: &ResearcherAnnotation) -> Self {
        AnnotationInput {
            annotation_id: Some(a.annotation_id.clone()),
            bbox: a.bbox,
            label: a.label.clone(),
            food_code: a.food_code.as_ref().map(|c| c.as_str().to_owned()),
            energy_kcal: a.energy_kcal,
            energy_source: a.energy_source,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SaveAnnotationsRequest {
    pub expected_version: u64,
    pub initials: String,
    pub annotations: Vec<AnnotationInput>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotationsResponse {
    pub occasion_id: OccasionId,
    pub state: LifecycleState,
    pub version: u64,
    pub annotations: Vec<ResearcherAnnotation>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FinalizeRequest {
    pub expected_version: u64,
    pub initials: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateResponse {
    pub occasion_id: OccasionId,
    pub state: LifecycleState,
    pub version: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditTrailResponse {
    pub occasion_id: OccasionId,
    pub events: Vec<AuditEvent>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoodListResponse {
    pub hash: String,
    pub count: usize,
    pub items: Vec<FoodItem>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoodHashResponse {
    pub hash: String,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchResponse {
    pub query: String,
    pub limit: usize,
    pub results: Vec<FoodItem>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OccasionPreview {
    pub occasion_id: OccasionId,
    pub study_id: StudyId,
    pub state: LifecycleState,
    pub version: u64,
    pub captured_at: DateTime<Utc>,
    pub before_url: String,
    pub before_thumbnail_url: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub after_url: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub after_thumbnail_url: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParticipantOccasions {
    pub participant_id: ParticipantId,
    pub occasions: Vec<OccasionPreview>,
}

/// Study-level header of an export.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExportManifest {
    pub schema_version: String,
    pub study_id: StudyId,
    /// Time of the latest recorded change in the study, so that exporting
    /// twice without writes in between yields identical bytes.
    pub exported_at: Option<DateTime<Utc>>,
    pub food_list_hash: String,
    pub occasion_count: usize,
    pub annotation_count: usize,
    /// Content hashes of every image referenced by the occasions, sorted.
    pub images: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExportedAnnotation {
    pub annotation_id: AnnotationId,
    pub initials: String,
    #[serde(rename = "box")]
    pub bbox: BoundingBox,
    pub label: String,
    pub food_code: Option<FoodCode>,
    /// True when the label did not come from the food list.
    pub free_text: bool,
    pub energy_kcal: Option<f64>,
    pub energy_source: Option<EnergySource>,
    pub created_at: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExportedOccasion {
    pub occasion_id: OccasionId,
    pub participant_id: ParticipantId,
    pub study_id: StudyId,
    pub state: LifecycleState,
    pub version: u64,
    pub metadata: CaptureMetadata,
    pub before: ImageCapture,
    pub after: Option<ImageCapture>,
    pub predictions: Vec<PredictedFood>,
    pub participant_confirmed: Vec<ConfirmedFood>,
    pub researcher_annotations: Vec<ExportedAnnotation>,
    pub energy_estimate: Option<EnergyEstimate>,
    pub history: Vec<StateChange>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExportBundle {
    pub manifest: ExportManifest,
    pub occasions: Vec<ExportedOccasion>,
}

pub const EXPORT_CSV_HEADER: [&str; 11] = [
    "occasion_id",
    "participant_id",
    "initials",
    "label",
    "food_code",
    "x",
    "y",
    "w",
    "h",
    "energy_kcal",
    "state",
];

pub fn blob_url(hash: &str) -> String {
    format!("{API_PREFIX}/blobs/{hash}")
}

pub fn thumbnail_url(hash: &str) -> String {
    format!("{API_PREFIX}/blobs/{hash}/thumbnail")
}
