//! Turning an image pair and metadata flags into a queued draft.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use foodrec_core::{CaptureMetadata, GpsFix};

use crate::error::CliError;
use crate::session::Draft;

/// Metadata as given on the command line. Unset flags stay unset in the
/// uploaded metadata.
#[derive(Debug, Clone, Default)]
pub struct MetadataFlags {
    pub time: Option<String>,
    pub lat: Option<f64>,
    pub lon: Option<f64>,
    pub pose: Option<f64>,
    pub fiducial: bool,
    pub fiducial_scale: Option<f64>,
    /// `KEY=VALUE` pairs.
    pub exif: Vec<String>,
    /// JSON file with a full or partial metadata object; flags override it.
    pub metadata_file: Option<PathBuf>,
}

#[derive(Debug, Clone)]
pub struct Captured {
    pub draft: Draft,
    /// Set when the timestamp was taken from the before image's
    /// modification time.
    pub notice: Option<String>,
}

/// Flag that sets each metadata field, for error messages.
fn flag_for(field: &str) -> &'static str {
    match field {
        "captured_at" => "--time",
        "gps.latitude" => "--lat",
        "gps.longitude" => "--lon",
        "camera_pose_angle" => "--pose",
        "fiducial_scale_mm_per_px" => "--fiducial-scale",
        "fiducial_marker_present" => "--fiducial",
        "exif" => "--exif",
        _ => "--metadata",
    }
}

fn bad(field: &str, reason: impl Into<String>) -> CliError {
    CliError::BadMetadata {
        field: field.to_owned(),
        flag: flag_for(field),
        reason: reason.into(),
    }
}

fn check_image(path: &Path) -> Result<PathBuf, CliError> {
    if !path.is_file() {
        return Err(CliError::FileNotFound(path.to_owned()));
    }
    image::open(path).map_err(|e| CliError::BadImage {
        path: path.to_owned(),
        reason: e.to_string(),
    })?;
    Ok(fs::canonicalize(path)?)
}

#[derive(serde::Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct PartialMetadata {
    captured_at: Option<DateTime<Utc>>,
    gps: Option<GpsFix>,
    camera_pose_angle: Option<f64>,
    #[serde(default)]
    exif: BTreeMap<String, String>,
    fiducial_marker_present: Option<bool>,
    fiducial_scale_mm_per_px: Option<f64>,
}

pub fn build_metadata(
    flags: &MetadataFlags,
    before: &Path,
) -> Result<(CaptureMetadata, Option<String>), CliError> {
    let base = match &flags.metadata_file {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|_| CliError::FileNotFound(p.clone()))?;
            serde_json::from_str::<PartialMetadata>(&text)
                .map_err(|e| bad("metadata", format!("{}: {e}", p.display())))?
        }
        None => PartialMetadata::default(),
    };

    let mut notice = None;
    let captured_at = match (&flags.time, base.captured_at) {
        (Some(t), _) => DateTime::parse_from_rfc3339(t)
            .map_err(|e| {
                bad(
                    "captured_at",
                    format!("{t:?} is not an RFC 3339 timestamp: {e}"),
                )
            })?
            .with_timezone(&Utc),
        (None, Some(t)) => t,
        (None, None) => {
            let modified = fs::metadata(before)?.modified()?;
            let at = DateTime::<Utc>::from(modified);
            notice = Some(format!(
                "notice: no --time given; using the modification time of {} ({})",
                before.display(),
                at.to_rfc3339()
            ));
            at
        }
    };

    let gps = match (flags.lat, flags.lon) {
        (Some(latitude), Some(longitude)) => Some(GpsFix {
            latitude,
            longitude,
        }),
        (None, None) => base.gps,
        (Some(_), None) => return Err(bad("gps.longitude", "--lat given without --lon")),
        (None, Some(_)) => return Err(bad("gps.latitude", "--lon given without --lat")),
    };

    let mut exif = base.exif;
    for pair in &flags.exif {
        let (k, v) = pair
            .split_once('=')
            .filter(|(k, _)| !k.trim().is_empty())
            .ok_or_else(|| bad("exif", format!("{pair:?} is not KEY=VALUE")))?;
        exif.insert(k.trim().to_owned(), v.to_owned());
    }

    let metadata = CaptureMetadata {
        captured_at,
        gps,
        camera_pose_angle: flags.pose.or(base.camera_pose_angle),
        exif,
        fiducial_marker_present: flags.fiducial || base.fiducial_marker_present.unwrap_or(false),
        fiducial_scale_mm_per_px: flags.fiducial_scale.or(base.fiducial_scale_mm_per_px),
    };
    if let Some(v) = metadata.violations().into_iter().next() {
        return Err(bad(&v.field, v.reason));
    }
    Ok((metadata, notice))
}

/// Checks both images and the metadata and builds a draft with fresh ids.
/// Nothing is sent.
pub fn capture(before: &Path, after: &Path, flags: &MetadataFlags) -> Result<Captured, CliError> {
    let before_path = check_image(before)?;
    let after_path = check_image(after)?;
    let (metadata, notice) = build_metadata(flags, &before_path)?;
    Ok(Captured {
        draft: Draft {
            draft_id: uuid::Uuid::new_v4().to_string(),
            idempotency_key: uuid::Uuid::new_v4().to_string(),
            before_path,
            after_path,
            captured_at_from_mtime: notice.is_some(),
            metadata,
            queued_at: Utc::now(),
            last_error: None,
        },
        notice,
    })
}
