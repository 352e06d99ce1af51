//! Image analysis boundary, Step-5 refinement and energy-error metrics.
//!
//! Real segmentation, classification and portion models are not part of
//! this crate. They plug in behind [`Analyzer`]; the crate ships two
//! deterministic stubs so the rest of the pipeline can run end to end.

mod metrics;
mod refine;
mod stub;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{CaptureMetadata, ImageCapture, ImageError, PredictedFood};

pub use metrics::{
    classify_estimate, mean_error_rate, write_metrics_csv, EstimateClass, EvaluationRecord,
    MetricError, METRICS_CSV_HEADER,
};
pub use refine::{
    box_around_pin, estimate_portion, portion_kcal, refine, Refinement, SURFACE_DENSITY_G_PER_MM2,
};
pub use stub::{GridStub, SidecarEntry, SidecarStub, GRID_STUB_LABEL, SIDECAR_SUFFIX};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AnalyzerKind {
    /// Replays predictions from a `<image>.predictions.json` sidecar.
    SidecarStub,
    /// One "unknown food" prediction at the image center.
    GridStub,
    /// A real model behind an external service. Declared, not provided.
    External,
}

impl fmt::Display for AnalyzerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AnalyzerKind::SidecarStub => "SidecarStub",
            AnalyzerKind::GridStub => "GridStub",
            AnalyzerKind::External => "External",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnalyzerRef {
    pub analyzer_id: String,
    pub kind: AnalyzerKind,
}

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("no sidecar predictions file for {0}")]
    SidecarMissing(String),
    #[error("sidecar {path} is malformed: {reason}")]
    SidecarMalformed { path: String, reason: String },
    #[error("image bytes do not decode: {0}")]
    Decode(#[from] ImageError),
    #[error("image bytes do not match content hash {0}")]
    HashMismatch(String),
    #[error("analyzer produced an invalid prediction: {0}")]
    InvalidPrediction(String),
    #[error("analyzer kind {0} is not available in this build")]
    Unavailable(AnalyzerKind),
}

/// What an analyzer sees: the before image and its capture context.
#[derive(Debug, Clone, Copy)]
pub struct AnalysisInput<'a> {
    pub image: &'a ImageCapture,
    pub bytes: &'a [u8],
    /// Original file name of the upload, when the client sent one.
    pub file_name: Option<&'a str>,
    pub metadata: &'a CaptureMetadata,
}

pub trait Analyzer: Send + Sync {
    fn reference(&self) -> &AnalyzerRef;

    fn predict(&self, input: &AnalysisInput<'_>) -> Result<Vec<PredictedFood>, AnalysisError>;
}

/// Runs `analyzer` on the before image after checking that the bytes decode
/// and match the recorded hash, then checks the analyzer's output: every pin
/// inside the image, every confidence in [0, 1], labels non-empty.
pub fn analyze(
    input: &AnalysisInput<'_>,
    analyzer: &dyn Analyzer,
) -> Result<Vec<PredictedFood>, AnalysisError> {
    let probed = crate::model::probe_image(input.image.kind, input.bytes)?;
    if probed.content_hash != input.image.content_hash {
        return Err(AnalysisError::HashMismatch(
            input.image.content_hash.clone(),
        ));
    }
    let predictions = analyzer.predict(input)?;
    for p in &predictions {
        if !p.pin.is_inside(input.image.width_px, input.image.height_px) {
            return Err(AnalysisError::InvalidPrediction(format!(
                "pin ({}, {}) of {} lies outside the {}x{} image",
                p.pin.x_px,
                p.pin.y_px,
                p.prediction_id,
                input.image.width_px,
                input.image.height_px
            )));
        }
        if !(0.0..=1.0).contains(&p.confidence) {
            return Err(AnalysisError::InvalidPrediction(format!(
                "confidence {} of {} is outside [0, 1]",
                p.confidence, p.prediction_id
            )));
        }
        if p.label.trim().is_empty() {
            return Err(AnalysisError::InvalidPrediction(format!(
                "{} has an empty label",
                p.prediction_id
            )));
        }
    }
    Ok(predictions)
}

/// Builds the analyzer named by `reference`. Sidecar lookups happen in
/// `sidecar_dir`.
pub fn build_analyzer(
    reference: AnalyzerRef,
    sidecar_dir: Option<std::path::PathBuf>,
) -> Result<Box<dyn Analyzer>, AnalysisError> {
    match reference.kind {
        AnalyzerKind::GridStub => Ok(Box::new(GridStub::with_id(reference.analyzer_id))),
        AnalyzerKind::SidecarStub => Ok(Box::new(SidecarStub::with_id(
            reference.analyzer_id,
            sidecar_dir.unwrap_or_else(|| ".".into()),
        ))),
        AnalyzerKind::External => Err(AnalysisError::Unavailable(AnalyzerKind::External)),
    }
}
