use std::io::Cursor;

use image::ImageFormat;

use crate::error::ApiError;

pub const DEFAULT_THUMBNAIL_PX: u32 = 160;
pub const MAX_THUMBNAIL_PX: u32 = 1024;

/// Scales an image to fit a `max_px` square, keeping the aspect ratio, and
/// encodes it as PNG. Images already small enough are re-encoded unscaled.
pub fn thumbnail(bytes: &[u8], max_px: u32) -> Result<Vec<u8>, ApiError> {
    let img = image::load_from_memory(bytes)
        .map_err(|e| ApiError::internal(format!("stored image does not decode: {e}")))?;
    let small = if img.width() > max_px || img.height() > max_px {
        img.thumbnail(max_px, max_px)
    } else {
        img
    };
    let mut out = Cursor::new(Vec::new());
    small
        .write_to(&mut out, ImageFormat::Png)
        .map_err(|e| ApiError::internal(e.to_string()))?;
    Ok(out.into_inner())
}
