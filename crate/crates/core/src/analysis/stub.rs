use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{AnalysisError, AnalysisInput, Analyzer, AnalyzerKind, AnalyzerRef};
use crate::model::{PinLocation, PredictedFood, PredictionId};

pub const GRID_STUB_LABEL: &str = "unknown food";
pub const SIDECAR_SUFFIX: &str = ".predictions.json";

#[derive(Debug, Clone)]
pub struct GridStub {
    reference: AnalyzerRef,
}

impl GridStub {
    pub fn new() -> Self {
        Self::with_id("grid-stub")
    }

    pub fn with_id(id: impl Into<String>) -> Self {
        Self {
            reference: AnalyzerRef {
                analyzer_id: id.into(),
                kind: AnalyzerKind::GridStub,
            },
        }
    }
}

impl Default for GridStub {
    fn default() -> Self {
        Self::new()
    }
}

impl Analyzer for GridStub {
    fn reference(&self) -> &AnalyzerRef {
        &self.reference
    }

    fn predict(&self, input: &AnalysisInput<'_>) -> Result<Vec<PredictedFood>, AnalysisError> {
        Ok(vec![PredictedFood {
            prediction_id: PredictionId::new("p1"),
            label: GRID_STUB_LABEL.to_owned(),
            food_code: None,
            pin: PinLocation::new(
                i64::from(input.image.width_px / 2),
                i64::from(input.image.height_px / 2),
            ),
            confidence: 0.5,
        }])
    }
}

/// One entry of a sidecar predictions file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SidecarEntry {
    pub label: String,
    pub x_px: i64,
    pub y_px: i64,
    pub confidence: f64,
}

/// Replays scripted predictions.
///
/// For an image uploaded as `meal.jpg` the stub reads
/// `<dir>/meal.jpg.predictions.json`; when the upload carried no file name,
/// `<dir>/<content hash>.predictions.json` is tried instead.
#[derive(Debug, Clone)]
pub struct SidecarStub {
    reference: AnalyzerRef,
    dir: PathBuf,
}

impl SidecarStub {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self::with_id("sidecar-stub", dir)
    }

    pub fn with_id(id: impl Into<String>, dir: impl Into<PathBuf>) -> Self {
        Self {
            reference: AnalyzerRef {
                analyzer_id: id.into(),
                kind: AnalyzerKind::SidecarStub,
            },
            dir: dir.into(),
        }
    }

    /// Path of the sidecar belonging to an image file.
    pub fn sidecar_path(image_path: &Path) -> PathBuf {
        let mut name = image_path.as_os_str().to_owned();
        name.push(SIDECAR_SUFFIX);
        PathBuf::from(name)
    }

    fn candidates(&self, input: &AnalysisInput<'_>) -> Vec<PathBuf> {
        let mut out = Vec::new();
        if let Some(name) = input.file_name {
            // Only the final component; never let a client name escape the dir.
            if let Some(base) = Path::new(name).file_name() {
                out.push(Self::sidecar_path(&self.dir.join(base)));
            }
        }
        out.push(
            self.dir
                .join(format!("{}{SIDECAR_SUFFIX}", input.image.content_hash)),
        );
        out
    }
}

impl Analyzer for SidecarStub {
    fn reference(&self) -> &AnalyzerRef {
        &self.reference
    }

    fn predict(&self, input: &AnalysisInput<'_>) -> Result<Vec<PredictedFood>, AnalysisError> {
        let candidates = self.candidates(input);
        let Some(path) = candidates.iter().find(|p| p.is_file()) else {
            let shown = input
                .file_name
                .map(str::to_owned)
                .unwrap_or_else(|| input.image.content_hash.clone());
            return Err(AnalysisError::SidecarMissing(shown));
        };
        let malformed = |reason: String| AnalysisError::SidecarMalformed {
            path: path.display().to_string(),
            reason,
        };
        let text = std::fs::read_to_string(path).map_err(|e| malformed(e.to_string()))?;
        let entries: Vec<SidecarEntry> =
            serde_json::from_str(&text).map_err(|e| malformed(e.to_string()))?;
        Ok(entries
            .into_iter()
            .enumerate()
            .map(|(i, e)| PredictedFood {
                prediction_id: PredictionId::new(format!("p{}", i + 1)),
                label: e.label,
                food_code: None,
                pin: PinLocation::new(e.x_px, e.y_px),
                confidence: e.confidence,
            })
            .collect())
    }
}
