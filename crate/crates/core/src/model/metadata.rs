use std::collections::BTreeMap;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GpsFix {
    pub latitude: f64,
    pub longitude: f64,
}

/// Capture context sent along with an image pair.
///
/// Only range checks are applied; nothing here is cross-checked for
/// plausibility against the image content.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaptureMetadata {
    pub captured_at: DateTime<Utc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gps: Option<GpsFix>,
    /// Degrees from horizontal.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub camera_pose_angle: Option<f64>,
    #[serde(default)]
    pub exif: BTreeMap<String, String>,
    #[serde(default)]
    pub fiducial_marker_present: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fiducial_scale_mm_per_px: Option<f64>,
}

/// One failed field check, named by its dotted JSON path.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FieldViolation {
    pub field: String,
    pub reason: String,
}

impl FieldViolation {
    pub fn new(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Self {
            field: field.into(),
            reason: reason.into(),
        }
    }
}

impl CaptureMetadata {
    pub fn new(captured_at: DateTime<Utc>) -> Self {
        Self {
            captured_at,
            gps: None,
            camera_pose_angle: None,
            exif: BTreeMap::new(),
            fiducial_marker_present: false,
            fiducial_scale_mm_per_px: None,
        }
    }

    /// Returns every violated invariant; an empty list means valid.
    pub fn violations(&self) -> Vec<FieldViolation> {
        let mut out = Vec::new();
        if let Some(gps) = &self.gps {
            if !(-90.0..=90.0).contains(&gps.latitude) {
                out.push(FieldViolation::new(
                    "gps.latitude",
                    format!("{} is outside [-90, 90]", gps.latitude),
                ));
            }
            if !(-180.0..=180.0).contains(&gps.longitude) {
                out.push(FieldViolation::new(
                    "gps.longitude",
                    format!("{} is outside [-180, 180]", gps.longitude),
                ));
            }
        }
        if let Some(angle) = self.camera_pose_angle {
            if !angle.is_finite() {
                out.push(FieldViolation::new("camera_pose_angle", "must be finite"));
            }
        }
        match self.fiducial_scale_mm_per_px {
            Some(scale) if !(scale.is_finite() && scale > 0.0) => out.push(FieldViolation::new(
                "fiducial_scale_mm_per_px",
                format!("{scale} is not a positive number"),
            )),
            Some(_) if !self.fiducial_marker_present => out.push(FieldViolation::new(
                "fiducial_scale_mm_per_px",
                "scale given but fiducial_marker_present is false",
            )),
            _ => {}
        }
        out
    }

    pub fn validate(&self) -> Result<(), Vec<FieldViolation>> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(v)
        }
    }
}
