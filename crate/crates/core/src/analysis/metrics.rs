//! Energy-estimation error metrics.
//!
//! The reported "mean error rate" is taken to be the mean absolute
//! percentage error over eating occasions:
//!
//! ```text
//! MER = 100 / n * sum_i |estimated_i - groundtruth_i| / groundtruth_i
//! ```

use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::OccasionId;

pub const METRICS_CSV_HEADER: [&str; 5] = [
    "occasion_id",
    "groundtruth_kcal",
    "estimated_kcal",
    "error_fraction",
    "classification",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationRecord {
    pub occasion_id: OccasionId,
    pub groundtruth_kcal: f64,
    pub estimated_kcal: f64,
    pub estimator_id: String,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricError {
    #[error("no evaluation records")]
    EmptyInput,
    #[error("record {index} has non-positive groundtruth {value}")]
    NonPositiveGroundtruth { index: usize, value: f64 },
    #[error("record {index} has invalid estimate {value}")]
    InvalidEstimate { index: usize, value: f64 },
}

/// Which side of the identity line an estimate falls on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EstimateClass {
    Over,
    Under,
    Exact,
}

impl EstimateClass {
    pub fn as_str(self) -> &'static str {
        match self {
            EstimateClass::Over => "over",
            EstimateClass::Under => "under",
            EstimateClass::Exact => "exact",
        }
    }
}

fn check(records: &[EvaluationRecord]) -> Result<(), MetricError> {
    if records.is_empty() {
        return Err(MetricError::EmptyInput);
    }
    for (index, r) in records.iter().enumerate() {
        if !(r.groundtruth_kcal > 0.0 && r.groundtruth_kcal.is_finite()) {
            return Err(MetricError::NonPositiveGroundtruth {
                index,
                value: r.groundtruth_kcal,
            });
        }
        if !(r.estimated_kcal >= 0.0 && r.estimated_kcal.is_finite()) {
            return Err(MetricError::InvalidEstimate {
                index,
                value: r.estimated_kcal,
            });
        }
    }
    Ok(())
}

fn error_fraction(r: &EvaluationRecord) -> f64 {
    (r.estimated_kcal - r.groundtruth_kcal).abs() / r.groundtruth_kcal
}

/// Mean absolute percentage error, in percent.
pub fn mean_error_rate(records: &[EvaluationRecord]) -> Result<f64, MetricError> {
    check(records)?;
    // Neumaier-compensated running sum.
    let (mut sum, mut comp) = (0.0f64, 0.0f64);
    for r in records {
        let x = error_fraction(r);
        let t = sum + x;
        if sum.abs() >= x.abs() {
            comp += (sum - t) + x;
        } else {
            comp += (x - t) + sum;
        }
        sum = t;
    }
    Ok(100.0 * ((sum + comp) / records.len() as f64))
}

/// Over when the estimate exceeds `groundtruth * (1 + tol)`, Under when it
/// falls below `groundtruth * (1 - tol)`, Exact otherwise.
pub fn classify_estimate(record: &EvaluationRecord, tolerance_fraction: f64) -> EstimateClass {
    let gt = record.groundtruth_kcal;
    if record.estimated_kcal > gt * (1.0 + tolerance_fraction) {
        EstimateClass::Over
    } else if record.estimated_kcal < gt * (1.0 - tolerance_fraction) {
        EstimateClass::Under
    } else {
        EstimateClass::Exact
    }
}

/// Writes one metrics row per record. `error_fraction` is the absolute
/// relative error, so the column mean times 100 is the mean error rate; the
/// sign lives in `classification`.
pub fn write_metrics_csv<W: Write>(
    records: &[EvaluationRecord],
    tolerance_fraction: f64,
    out: W,
) -> Result<(), std::io::Error> {
    if let Err(e) = check(records) {
        if e != MetricError::EmptyInput {
            return Err(std::io::Error::new(std::io::ErrorKind::InvalidData, e));
        }
    }
    let mut w = csv::Writer::from_writer(out);
    w.write_record(METRICS_CSV_HEADER)?;
    for r in records {
        w.write_record([
            r.occasion_id.as_str(),
            &r.groundtruth_kcal.to_string(),
            &r.estimated_kcal.to_string(),
            &error_fraction(r).to_string(),
            classify_estimate(r, tolerance_fraction).as_str(),
        ])?;
    }
    w.flush()
}
