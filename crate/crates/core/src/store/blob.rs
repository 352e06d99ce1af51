use std::collections::HashMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::RwLock;

use serde::{Deserialize, Serialize};

use super::StoreError;
use crate::model::{content_hash, ImageCapture, MediaType};

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BlobRef {
    pub content_hash: String,
    pub byte_length: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub media_type: Option<MediaType>,
}

impl From<&ImageCapture> for BlobRef {
    fn from(img: &ImageCapture) -> Self {
        BlobRef {
            content_hash: img.content_hash.clone(),
            byte_length: img.byte_length,
            media_type: Some(img.media_type),
        }
    }
}

#[derive(Debug)]
enum Backend {
    Dir(PathBuf),
    Memory(RwLock<HashMap<String, Vec<u8>>>),
}

/// Immutable content-addressed bytes. Writing the same bytes twice stores
/// one copy and yields the same [`BlobRef`].
#[derive(Debug)]
pub struct BlobStore {
    backend: Backend,
}

fn is_hash(s: &str) -> bool {
    s.len() == 64 && s.bytes().all(|b| matches!(b, b'0'..=b'9' | b'a'..=b'f'))
}

impl BlobStore {
    pub fn open(root: impl Into<PathBuf>) -> Result<Self, StoreError> {
        let root = root.into();
        std::fs::create_dir_all(&root)?;
        Ok(Self {
            backend: Backend::Dir(root),
        })
    }

    pub fn in_memory() -> Self {
        Self {
            backend: Backend::Memory(RwLock::default()),
        }
    }

    fn path_for(root: &Path, hash: &str) -> PathBuf {
        root.join(&hash[..2]).join(hash)
    }

    pub fn put(&self, bytes: &[u8]) -> Result<BlobRef, StoreError> {
        let hash = content_hash(bytes);
        let blob = BlobRef {
            content_hash: hash.clone(),
            byte_length: bytes.len() as u64,
            media_type: MediaType::sniff(bytes),
        };
        match &self.backend {
            Backend::Memory(map) => {
                map.write()
                    .expect("blob map poisoned")
                    .entry(hash)
                    .or_insert_with(|| bytes.to_vec());
            }
            Backend::Dir(root) => {
                let path = Self::path_for(root, &hash);
                if path.exists() {
                    return Ok(blob);
                }
                let dir = path.parent().expect("blob path has a parent");
                std::fs::create_dir_all(dir)?;
                let mut tmp = tempfile_in(dir)?;
                tmp.1.write_all(bytes)?;
                tmp.1.sync_all()?;
                drop(tmp.1);
                // Rename is atomic; a concurrent writer of the same bytes
                // produces an identical file.
                std::fs::rename(&tmp.0, &path)?;
            }
        }
        Ok(blob)
    }

    pub fn get(&self, hash: &str) -> Result<Vec<u8>, StoreError> {
        if !is_hash(hash) {
            return Err(StoreError::NotFound(hash.to_owned()));
        }
        let bytes = match &self.backend {
            Backend::Memory(map) => map
                .read()
                .expect("blob map poisoned")
                .get(hash)
                .cloned()
                .ok_or_else(|| StoreError::NotFound(hash.to_owned()))?,
            Backend::Dir(root) => match std::fs::read(Self::path_for(root, hash)) {
                Ok(b) => b,
                Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
                    return Err(StoreError::NotFound(hash.to_owned()))
                }
                Err(e) => return Err(e.into()),
            },
        };
        if content_hash(&bytes) != hash {
            return Err(StoreError::Corrupt(format!(
                "blob {hash} fails its hash check"
            )));
        }
        Ok(bytes)
    }

    pub fn contains(&self, hash: &str) -> bool {
        if !is_hash(hash) {
            return false;
        }
        match &self.backend {
            Backend::Memory(map) => map.read().expect("blob map poisoned").contains_key(hash),
            Backend::Dir(root) => Self::path_for(root, hash).is_file(),
        }
    }
}

fn tempfile_in(dir: &Path) -> std::io::Result<(PathBuf, std::fs::File)> {
    let path = dir.join(format!(".tmp-{}", uuid::Uuid::new_v4()));
    let file = std::fs::OpenOptions::new()
        .write(true)
        .create_new(true)
        .open(&path)?;
    Ok((path, file))
}
