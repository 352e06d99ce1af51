use std::fmt;
use std::io::Cursor;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ImageKind {
    Before,
    After,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum MediaType {
    Jpeg,
    Png,
}

impl MediaType {
    pub fn mime(self) -> &'static str {
        match self {
            MediaType::Jpeg => "image/jpeg",
            MediaType::Png => "image/png",
        }
    }

    /// Sniffs the media type from magic bytes.
    pub fn sniff(bytes: &[u8]) -> Option<Self> {
        match image::guess_format(bytes).ok()? {
            image::ImageFormat::Jpeg => Some(MediaType::Jpeg),
            image::ImageFormat::Png => Some(MediaType::Png),
            _ => None,
        }
    }
}

impl fmt::Display for MediaType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MediaType::Jpeg => "JPEG",
            MediaType::Png => "PNG",
        })
    }
}

/// One stored image of an eating occasion.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImageCapture {
    pub kind: ImageKind,
    /// Lowercase hex SHA-256 of the image bytes.
    pub content_hash: String,
    pub width_px: u32,
    pub height_px: u32,
    pub media_type: MediaType,
    #[serde(default)]
    pub byte_length: u64,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ImageError {
    #[error("unsupported image format (expected JPEG or PNG)")]
    UnsupportedFormat,
    #[error("image could not be decoded: {0}")]
    Decode(String),
    #[error("image has zero width or height")]
    EmptyImage,
}

/// Lowercase hex SHA-256 digest.
pub fn content_hash(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Reads media type and dimensions from the image header and hashes the bytes.
pub fn probe_image(kind: ImageKind, bytes: &[u8]) -> Result<ImageCapture, ImageError> {
    let media_type = MediaType::sniff(bytes).ok_or(ImageError::UnsupportedFormat)?;
    let format = match media_type {
        MediaType::Jpeg => image::ImageFormat::Jpeg,
        MediaType::Png => image::ImageFormat::Png,
    };
    let (width_px, height_px) = image::ImageReader::with_format(Cursor::new(bytes), format)
        .into_dimensions()
        .map_err(|e| ImageError::Decode(e.to_string()))?;
    if width_px == 0 || height_px == 0 {
        return Err(ImageError::EmptyImage);
    }
    Ok(ImageCapture {
        kind,
        content_hash: content_hash(bytes),
        width_px,
        height_px,
        media_type,
        byte_length: bytes.len() as u64,
    })
}

impl ImageCapture {
    /// True when `bytes` hash to this capture's content hash.
    pub fn matches(&self, bytes: &[u8]) -> bool {
        content_hash(bytes) == self.content_hash
    }
}
