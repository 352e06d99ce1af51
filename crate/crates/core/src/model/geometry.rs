use std::fmt;

use serde::{Deserialize, Serialize};

use super::ImageCapture;

/// A participant-placed point on the before image.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PinLocation {
    pub x_px: i64,
    pub y_px: i64,
}

impl PinLocation {
    pub fn new(x_px: i64, y_px: i64) -> Self {
        Self { x_px, y_px }
    }

    pub fn is_inside(&self, width_px: u32, height_px: u32) -> bool {
        (0..i64::from(width_px)).contains(&self.x_px)
            && (0..i64::from(height_px)).contains(&self.y_px)
    }
}

/// Axis-aligned box in image pixels, top-left corner plus size.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BoundingBox {
    pub x_px: i64,
    pub y_px: i64,
    pub w_px: i64,
    pub h_px: i64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoxViolation {
    NegativeX,
    NegativeY,
    WidthBelowOne,
    HeightBelowOne,
    ExceedsRightEdge,
    ExceedsBottomEdge,
}

impl fmt::Display for BoxViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BoxViolation::NegativeX => "x_px < 0",
            BoxViolation::NegativeY => "y_px < 0",
            BoxViolation::WidthBelowOne => "w_px < 1",
            BoxViolation::HeightBelowOne => "h_px < 1",
            BoxViolation::ExceedsRightEdge => "x_px + w_px exceeds image width",
            BoxViolation::ExceedsBottomEdge => "y_px + h_px exceeds image height",
        })
    }
}

impl BoundingBox {
    pub fn new(x_px: i64, y_px: i64, w_px: i64, h_px: i64) -> Self {
        Self {
            x_px,
            y_px,
            w_px,
            h_px,
        }
    }

    pub fn area_px(&self) -> i64 {
        self.w_px.max(0) * self.h_px.max(0)
    }

    /// Every constraint the box breaks against an image of the given size.
    pub fn violations(&self, width_px: u32, height_px: u32) -> Vec<BoxViolation> {
        let mut out = Vec::new();
        if self.x_px < 0 {
            out.push(BoxViolation::NegativeX);
        }
        if self.y_px < 0 {
            out.push(BoxViolation::NegativeY);
        }
        if self.w_px < 1 {
            out.push(BoxViolation::WidthBelowOne);
        }
        if self.h_px < 1 {
            out.push(BoxViolation::HeightBelowOne);
        }
        // i128 keeps the sums exact for any i64 input.
        if i128::from(self.x_px) + i128::from(self.w_px) > i128::from(width_px) {
            out.push(BoxViolation::ExceedsRightEdge);
        }
        if i128::from(self.y_px) + i128::from(self.h_px) > i128::from(height_px) {
            out.push(BoxViolation::ExceedsBottomEdge);
        }
        out
    }
}

/// Checks a box against the dimensions of `image`.
pub fn validate_box(bbox: &BoundingBox, image: &ImageCapture) -> Result<(), Vec<BoxViolation>> {
    let v = bbox.violations(image.width_px, image.height_px);
    if v.is_empty() {
        Ok(())
    } else {
        Err(v)
    }
}
