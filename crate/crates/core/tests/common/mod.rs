#![allow(dead_code)]

use std::io::Cursor;

use chrono::{DateTime, Duration, Utc};
use foodrec_core::{
    probe_image, CaptureMetadata, EatingOccasion, ImageKind, LifecycleState, OccasionId,
    OccasionRecord,
};

pub fn png(w: u32, h: u32) -> Vec<u8> {
    let mut out = Cursor::new(Vec::new());
    image::RgbImage::from_fn(w, h, |x, y| image::Rgb([x as u8, y as u8, 7]))
        .write_to(&mut out, image::ImageFormat::Png)
        .unwrap();
    out.into_inner()
}

pub fn t0() -> DateTime<Utc> {
    "2021-05-01T12:30:00Z".parse().unwrap()
}

pub fn record(id: &str, participant: &str, minutes: i64) -> OccasionRecord {
    let before = probe_image(ImageKind::Before, &png(64, 48)).unwrap();
    let after = probe_image(ImageKind::After, &png(64, 48)).unwrap();
    let occasion = EatingOccasion {
        occasion_id: OccasionId::new(id),
        participant_id: participant.into(),
        study_id: "study-1".into(),
        before,
        after: Some(after),
        metadata: CaptureMetadata::new(t0() + Duration::minutes(minutes)),
        state: LifecycleState::Uploaded,
        version: 0,
    };
    OccasionRecord::new_uploaded(occasion, t0())
}
