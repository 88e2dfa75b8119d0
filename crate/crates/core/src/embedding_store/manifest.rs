use std::collections::{BTreeSet, HashSet};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{ClassName, SampleId, SceneId, StoreError};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub sample_id: SampleId,
    pub scene_id: SceneId,
    /// Camera or channel tag, e.g. `CAM_FRONT`.
    pub source: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub true_class: Option<ClassName>,
}

/// Sample → scene mapping, serialised as a JSON array of entries.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Manifest {
    pub entries: Vec<ManifestEntry>,
}

impl Manifest {
    pub fn new(entries: Vec<ManifestEntry>) -> Self {
        Self { entries }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Distinct scene ids, sorted.
    pub fn scenes(&self) -> BTreeSet<SceneId> {
        self.entries.iter().map(|e| e.scene_id.clone()).collect()
    }

    /// Fails on the first sample id that appears twice.
    pub fn check_unique(&self) -> Result<(), StoreError> {
        let mut seen = HashSet::with_capacity(self.entries.len());
        for e in &self.entries {
            if !seen.insert(e.sample_id.as_str()) {
                return Err(StoreError::DuplicateManifestEntry(e.sample_id.clone()));
            }
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self, StoreError> {
        serde_json::from_str(text).map_err(|e| StoreError::Manifest(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serialises")
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self, StoreError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| StoreError::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<(), StoreError> {
        let path = path.as_ref();
        fs::write(path, self.to_json()).map_err(|e| StoreError::io(path, e))
    }

    /// Compact JSON of the entries sorted by sample id.
    pub fn canonical_bytes(&self) -> Vec<u8> {
        let mut entries: Vec<&ManifestEntry> = self.entries.iter().collect();
        entries.sort_by(|a, b| a.sample_id.cmp(&b.sample_id));
        serde_json::to_vec(&entries).expect("manifest serialises")
    }

    /// Hex SHA-256 of [`Manifest::canonical_bytes`]. Independent of entry order.
    pub fn fingerprint(&self) -> String {
        let digest = Sha256::digest(self.canonical_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}
