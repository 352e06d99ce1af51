use chrono::{DateTime, Utc};

use crate::food::{FoodDatabase, FoodItem, Resolution};
use crate::model::{
    AnnotationId, BoundingBox, CaptureMetadata, ConfirmedFood, EnergyEstimate, EnergySource,
    ImageCapture, Initials, PinLocation, ResearcherAnnotation,
};

/// Assumed grams of food per square millimetre of visible region. This is a
/// placeholder physical constant for the stub estimator, not a measurement.
pub const SURFACE_DENSITY_G_PER_MM2: f64 = 0.01;

#[derive(Debug, Clone, PartialEq)]
pub struct Refinement {
    pub drafts: Vec<ResearcherAnnotation>,
    pub estimate: EnergyEstimate,
}

/// Square of side `min(width, height) / 4` (at least 1) centred on the pin,
/// clipped to the image. The left/top edge is `floor(pin - side / 2)`, so a
/// 25 px side around x = 100 spans 87..112.
pub fn box_around_pin(pin: PinLocation, width_px: u32, height_px: u32) -> BoundingBox {
    let (w, h) = (i64::from(width_px), i64::from(height_px));
    let side = (w.min(h) / 4).max(1);
    let lead = (side + 1) / 2;
    let clip = |center: i64, limit: i64| {
        let center = center.clamp(0, limit - 1);
        let lo = (center - lead).max(0);
        let hi = (center - lead + side).min(limit);
        // A 1 px side at the top/left edge would otherwise clip to nothing.
        (lo, (hi - lo).max(1))
    };
    let (x, bw) = clip(pin.x_px, w);
    let (y, bh) = clip(pin.y_px, h);
    BoundingBox::new(x, y, bw, bh)
}

/// Stub portion estimate, or `None` when it cannot be computed (no fiducial
/// scale, or no energy density for the item).
///
/// grams = area_px * scale_mm_per_px^2 * surface density; kcal = grams *
/// density_kcal_per_100g / 100.
pub fn portion_kcal(
    bbox: &BoundingBox,
    item: Option<&FoodItem>,
    metadata: &CaptureMetadata,
) -> Option<f64> {
    let scale = metadata.fiducial_scale_mm_per_px?;
    let density = item?.energy_kcal_per_100g?;
    let area_mm2 = bbox.area_px() as f64 * scale * scale;
    let grams = area_mm2 * SURFACE_DENSITY_G_PER_MM2;
    Some(grams * density / 100.0)
}

/// Like [`portion_kcal`] with "no estimate" reported as 0 kcal.
pub fn estimate_portion(
    bbox: &BoundingBox,
    item: Option<&FoodItem>,
    metadata: &CaptureMetadata,
) -> f64 {
    portion_kcal(bbox, item, metadata).unwrap_or(0.0)
}

/// Turns participant-confirmed foods into editable researcher drafts.
///
/// Labels are never changed here, only resolved against the food list so a
/// matching code can be attached. Drafts carry the `SYS` initials and ids
/// `sys-1`, `sys-2`, ... in confirmed order.
pub fn refine(
    confirmed: &[ConfirmedFood],
    before_image: &ImageCapture,
    db: &FoodDatabase,
    metadata: &CaptureMetadata,
    at: DateTime<Utc>,
) -> Refinement {
    let mut drafts = Vec::with_capacity(confirmed.len());
    let mut per_food = Vec::with_capacity(confirmed.len());
    for (i, food) in confirmed.iter().enumerate() {
        let bbox = box_around_pin(food.pin, before_image.width_px, before_image.height_px);
        let item = match db.resolve(&food.label) {
            Ok(Resolution::Matched(item)) => Some(item),
            _ => None,
        };
        let kcal = portion_kcal(&bbox, item, metadata);
        per_food.push((food.label.clone(), kcal.unwrap_or(0.0)));
        drafts.push(ResearcherAnnotation {
            annotation_id: AnnotationId::new(format!("sys-{}", i + 1)),
            initials: Initials::system(),
            bbox,
            label: food.label.clone(),
            food_code: item.map(|it| it.code.clone()),
            energy_kcal: kcal,
            energy_source: kcal.map(|_| EnergySource::Estimated),
            created_at: at,
        });
    }
    Refinement {
        drafts,
        estimate: EnergyEstimate::from_parts(per_food),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::food::{load_food_list, FoodCode};
    use crate::model::{ImageKind, MediaType};

    fn image(w: u32, h: u32) -> ImageCapture {
        ImageCapture {
            kind: ImageKind::Before,
            content_hash: String::new(),
            width_px: w,
            height_px: h,
            media_type: MediaType::Jpeg,
            byte_length: 0,
        }
    }

    fn meta(scale: Option<f64>) -> CaptureMetadata {
        let mut m = CaptureMetadata::new("2021-05-01T12:30:00Z".parse().unwrap());
        m.fiducial_marker_present = scale.is_some();
        m.fiducial_scale_mm_per_px = scale;
        m
    }

    fn item(energy: Option<f64>) -> FoodItem {
        FoodItem {
            code: FoodCode::parse("58100100").unwrap(),
            name: "potato".into(),
            energy_kcal_per_100g: energy,
        }
    }

    fn at() -> DateTime<Utc> {
        "2021-05-01T13:00:00Z".parse().unwrap()
    }

    #[test]
    fn empty_meal() {
        let r = refine(
            &[],
            &image(100, 100),
            &FoodDatabase::default(),
            &meta(None),
            at(),
        );
        assert!(r.drafts.is_empty());
        assert_eq!(r.estimate.total_kcal, 0.0);
    }

    #[test]
    fn center_pin_box_on_wide_image() {
        // side = min(200, 100) / 4 = 25; 100 - 12.5 and 50 - 12.5 floor to 87, 37.
        assert_eq!(
            box_around_pin(PinLocation::new(100, 50), 200, 100),
            BoundingBox::new(87, 37, 25, 25)
        );
    }

    #[test]
    fn corner_pins_are_clipped() {
        assert_eq!(
            box_around_pin(PinLocation::new(0, 0), 200, 100),
            BoundingBox::new(0, 0, 12, 12)
        );
        assert_eq!(
            box_around_pin(PinLocation::new(199, 99), 200, 100),
            BoundingBox::new(186, 86, 14, 14)
        );
    }

    #[test]
    fn tiny_image_still_gets_a_pixel() {
        assert_eq!(
            box_around_pin(PinLocation::new(0, 0), 3, 3),
            BoundingBox::new(0, 0, 1, 1)
        );
    }

    #[test]
    fn portion_formula() {
        // 10000 px * 0.25 mm^2/px * 0.01 g/mm^2 = 25 g; 25 g * 93 kcal / 100 g = 23.25 kcal.
        let kcal = estimate_portion(
            &BoundingBox::new(0, 0, 100, 100),
            Some(&item(Some(93.0))),
            &meta(Some(0.5)),
        );
        assert!((kcal - 23.25).abs() < 1e-12, "{kcal}");
    }

    #[test]
    fn no_estimate_cases() {
        let b = BoundingBox::new(0, 0, 100, 100);
        assert_eq!(
            estimate_portion(&b, Some(&item(Some(93.0))), &meta(None)),
            0.0
        );
        assert_eq!(
            estimate_portion(&b, Some(&item(None)), &meta(Some(0.5))),
            0.0
        );
        assert_eq!(estimate_portion(&b, None, &meta(Some(0.5))), 0.0);
        assert_eq!(portion_kcal(&b, None, &meta(Some(0.5))), None);
    }

    #[test]
    fn resolved_label_carries_code_and_estimate() {
        let db = load_food_list("code,name,energy_kcal_per_100g\n58100100,potato,93\n".as_bytes())
            .unwrap();
        let confirmed = [
            ConfirmedFood {
                label: "potato".into(),
                pin: PinLocation::new(100, 50),
            },
            ConfirmedFood {
                label: "grandma's stew".into(),
                pin: PinLocation::new(10, 10),
            },
        ];
        let r = refine(&confirmed, &image(200, 100), &db, &meta(Some(0.5)), at());
        assert_eq!(r.drafts.len(), 2);
        let d = &r.drafts[0];
        assert_eq!(d.food_code.as_ref().unwrap().as_str(), "58100100");
        assert_eq!(d.initials.as_str(), "SYS");
        assert_eq!(d.energy_source, Some(EnergySource::Estimated));
        assert_eq!(r.drafts[1].food_code, None);
        assert_eq!(r.drafts[1].energy_kcal, None);
        assert_eq!(r.drafts[1].label, "grandma's stew");
        let sum: f64 = r.estimate.per_food.iter().map(|(_, k)| k).sum();
        assert_eq!(r.estimate.total_kcal, sum);
    }
}
