//! Deterministic fixtures for the benchmarks.

use chrono::{TimeZone, Utc};
use foodrec_core::{
    Addition, EvaluationRecord, FoodCode, FoodDatabase, FoodItem, ImageCapture, ImageKind,
    MediaType, ParticipantReview, PinLocation, PredictedFood, PredictionId, Verdict, VerdictEntry,
};

const WORDS: [&str; 12] = [
    "potato", "roast", "milk", "whole", "juice", "orange", "bread", "rye", "pasta", "salad",
    "chicken", "rice",
];

/// A food list of `n` items with two- and three-word names.
pub fn food_list(n: usize) -> FoodDatabase {
    let items = (0..n)
        .map(|i| {
            let a = WORDS[i % WORDS.len()];
            let b = WORDS[(i / WORDS.len()) % WORDS.len()];
            let name = if i % 3 == 0 {
                format!("{a} {b} {}", WORDS[(i * 7) % WORDS.len()])
            } else {
                format!("{a} {b}")
            };
            FoodItem {
                code: FoodCode::parse(&format!("{:08}", 10_000_000 + i)).unwrap(),
                name,
                energy_kcal_per_100g: Some((i % 600) as f64),
            }
        })
        .collect();
    FoodDatabase::from_items(items).unwrap()
}

pub fn image(w: u32, h: u32) -> ImageCapture {
    ImageCapture {
        kind: ImageKind::Before,
        content_hash: String::new(),
        width_px: w,
        height_px: h,
        media_type: MediaType::Jpeg,
        byte_length: 0,
    }
}

/// `n` predictions with a review that confirms, relabels and removes in
/// turn and adds `n / 4` foods.
pub fn review_case(n: usize) -> (Vec<PredictedFood>, ParticipantReview) {
    let predictions: Vec<PredictedFood> = (0..n)
        .map(|i| PredictedFood {
            prediction_id: PredictionId::new(format!("p{i}")),
            label: WORDS[i % WORDS.len()].to_owned(),
            food_code: None,
            pin: PinLocation::new(i as i64 * 3, i as i64 * 2),
            confidence: 0.5,
        })
        .collect();
    let verdicts = predictions
        .iter()
        .enumerate()
        .map(|(i, p)| VerdictEntry {
            prediction_id: p.prediction_id.clone(),
            verdict: match i % 3 {
                0 => Verdict::Confirmed,
                1 => Verdict::Relabeled {
                    label: "water".into(),
                },
                _ => Verdict::Removed,
            },
        })
        .collect();
    let additions = (0..n / 4)
        .map(|i| Addition {
            label: "bread".into(),
            pin: PinLocation::new(i as i64, 1),
        })
        .collect();
    let review = ParticipantReview {
        verdicts,
        additions,
        submitted_at: Utc.with_ymd_and_hms(2021, 5, 1, 12, 0, 0).unwrap(),
    };
    (predictions, review)
}

pub fn evaluation_records(n: usize) -> Vec<EvaluationRecord> {
    (0..n)
        .map(|i| {
            let gt = 100.0 + (i % 997) as f64;
            EvaluationRecord {
                occasion_id: format!("o{i}").into(),
                groundtruth_kcal: gt,
                estimated_kcal: gt * (0.5 + (i % 101) as f64 / 100.0),
                estimator_id: "bench".into(),
            }
        })
        .collect()
}
