//! On-disk feature cache: one NPY file per sample plus `index.json`.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::npy;
use super::reshape::{Layout, ReshapedFeature, FEATURE_LEN};
use crate::error::{Error, Result};

pub const INDEX_FILE: &str = "index.json";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StoreMetadata {
    /// SHA-256 of the extractor model file, or a free-form tag for synthetic stores.
    pub model_sha256: String,
    pub layout: Layout,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StoreEntry {
    pub file: String,
    pub sha256: String,
    pub layout: Layout,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Index {
    metadata: StoreMetadata,
    entries: BTreeMap<String, StoreEntry>,
}

/// Feature cache rooted at a directory. Metadata is pinned at creation.
#[derive(Debug)]
pub struct FeatureStore {
    root: PathBuf,
    index: Index,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

impl FeatureStore {
    /// Opens the store at `root`, creating it if absent. An existing store
    /// must carry the same metadata.
    pub fn create(root: impl AsRef<Path>, metadata: StoreMetadata) -> Result<Self> {
        let root = root.as_ref().to_path_buf();
        if root.join(INDEX_FILE).exists() {
            let store = Self::open(&root)?;
            if store.index.metadata != metadata {
                return Err(Error::Store(format!(
                    "{} was created with {:?}, not {:?}",
                    root.display(),
                    store.index.metadata,
                    metadata
                )));
            }
            return Ok(store);
        }
        std::fs::create_dir_all(&root).map_err(|e| Error::io(&root, e))?;
        let store = Self {
            root,
            index: Index {
                metadata,
                entries: BTreeMap::new(),
            },
        };
        store.write_index()?;
        Ok(store)
    }

    pub fn open(root: impl AsRef<Path>) -> Result<Self> {
        let root = root.as_ref().to_path_buf();
        let path = root.join(INDEX_FILE);
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let index: Index = serde_json::from_str(&text)?;
        Ok(Self { root, index })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn metadata(&self) -> &StoreMetadata {
        &self.index.metadata
    }

    pub fn len(&self) -> usize {
        self.index.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.index.entries.is_empty()
    }

    pub fn contains(&self, source_id: &str) -> bool {
        self.index.entries.contains_key(source_id)
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.index.entries.keys().map(String::as_str)
    }

    pub fn entry(&self, source_id: &str) -> Option<&StoreEntry> {
        self.index.entries.get(source_id)
    }

    /// Total size in bytes of all feature files.
    pub fn payload_bytes(&self) -> Result<u64> {
        let mut total = 0;
        for e in self.index.entries.values() {
            let p = self.root.join(&e.file);
            total += std::fs::metadata(&p).map_err(|err| Error::io(&p, err))?.len();
        }
        Ok(total)
    }

    /// Persists `items` and rewrites the index once at the end.
    pub fn store(&mut self, items: &[ReshapedFeature]) -> Result<()> {
        for item in items {
            if item.layout != self.index.metadata.layout {
                return Err(Error::Layout {
                    stored: self.index.metadata.layout.to_string(),
                    requested: item.layout.to_string(),
                });
            }
            if item.data.len() != FEATURE_LEN {
                return Err(Error::shape(item.layout.shape(), item.data.len()));
            }
            let file = format!("{}.npy", &sha256_hex(item.source_id.as_bytes())[..24]);
            let bytes = npy::to_bytes(&item.layout.shape(), &item.data)?;
            let path = self.root.join(&file);
            std::fs::write(&path, &bytes).map_err(|e| Error::io(&path, e))?;
            self.index.entries.insert(
                item.source_id.clone(),
                StoreEntry {
                    file,
                    sha256: sha256_hex(&bytes),
                    layout: item.layout,
                },
            );
        }
        self.write_index()
    }

    /// Loads `ids` in order, verifying checksums and the requested layout.
    pub fn load(&self, ids: &[impl AsRef<str>], layout: Layout) -> Result<Vec<ReshapedFeature>> {
        ids.iter().map(|id| self.load_one(id.as_ref(), layout)).collect()
    }

    pub fn load_one(&self, source_id: &str, layout: Layout) -> Result<ReshapedFeature> {
        let entry = self
            .index
            .entries
            .get(source_id)
            .ok_or_else(|| Error::Store(format!("no entry for {source_id:?}")))?;
        if entry.layout != layout {
            return Err(Error::Layout {
                stored: entry.layout.to_string(),
                requested: layout.to_string(),
            });
        }
        let path = self.root.join(&entry.file);
        let bytes = std::fs::read(&path).map_err(|e| Error::io(&path, e))?;
        let found = sha256_hex(&bytes);
        if found != entry.sha256 {
            return Err(Error::Checksum {
                what: path.display().to_string(),
                expected: entry.sha256.clone(),
                found,
            });
        }
        let (shape, data) = npy::from_bytes(&bytes)?;
        if shape != layout.shape() {
            return Err(Error::shape(layout.shape(), shape));
        }
        Ok(ReshapedFeature {
            data,
            layout,
            source_id: source_id.to_string(),
        })
    }

    // temp file + rename so concurrent readers never see a partial index
    fn write_index(&self) -> Result<()> {
        let path = self.root.join(INDEX_FILE);
        let tmp = self.root.join(format!("{INDEX_FILE}.tmp"));
        let text = serde_json::to_string_pretty(&self.index)?;
        std::fs::write(&tmp, text).map_err(|e| Error::io(&tmp, e))?;
        std::fs::rename(&tmp, &path).map_err(|e| Error::io(&path, e))
    }
}
