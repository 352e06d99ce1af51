//! Domain types shared by the server, the client and the export format.
//!
//! JSON field names are snake_case, timestamps are RFC 3339 strings and ids
//! are opaque strings. Image coordinates are integer pixels with the origin
//! at the top-left corner and y growing downward.

mod annotation;
mod geometry;
mod ids;
mod image;
mod lifecycle;
mod metadata;
mod record;
mod review;

pub use annotation::{EnergySource, Initials, InitialsError, ResearcherAnnotation};
pub use geometry::{validate_box, BoundingBox, BoxViolation, PinLocation};
pub use ids::{AnnotationId, OccasionId, ParticipantId, PredictionId, StudyId};
pub use image::{content_hash, probe_image, ImageCapture, ImageError, ImageKind, MediaType};
pub use lifecycle::{advance_state, EatingOccasion, LifecycleError, LifecycleState};
pub use metadata::{CaptureMetadata, FieldViolation, GpsFix};
pub use record::{EnergyEstimate, OccasionRecord, StateChange};
pub use review::{
    merge_review, Addition, ConfirmedFood, ParticipantReview, PredictedFood, ReviewError, Verdict,
    VerdictEntry,
};
