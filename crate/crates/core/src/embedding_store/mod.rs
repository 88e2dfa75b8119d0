//! Embedding sets, the `VLED` container, and the sample → scene manifest.

mod ids;
mod manifest;
mod pool;
mod set;
pub mod vled;

use std::path::{Path, PathBuf};

pub use ids::{ClassName, IdError, SampleId, SceneId, MAX_ID_BYTES};
pub use manifest::{Manifest, ManifestEntry};
pub use pool::{join_manifest, IndexedPool};
pub use set::{l2_normalize, EmbeddingSet, NORM_TOLERANCE};
pub use vled::{read_embeddings, write_embeddings, FormatError};

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error(transparent)]
    Format(#[from] FormatError),
    #[error("dimension must be positive")]
    ZeroDimension,
    #[error("record {id} has {found} components, expected {expected}")]
    DimMismatch { id: SampleId, expected: usize, found: usize },
    #[error("component buffer holds {found} values, expected {expected}")]
    BufferLength { expected: usize, found: usize },
    #[error("duplicate sample id {0}")]
    DuplicateId(SampleId),
    #[error("record {id} has a non-finite component at index {component}")]
    NonFiniteComponent { id: SampleId, component: usize },
    #[error("record {0} is an all-zero vector")]
    ZeroVector(SampleId),
    #[error("invalid manifest: {0}")]
    Manifest(String),
    #[error("sample {0} has no manifest entry")]
    MissingManifestEntry(SampleId),
    #[error("sample {0} appears more than once in the manifest")]
    DuplicateManifestEntry(SampleId),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

impl StoreError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        StoreError::Io { path: path.to_owned(), source }
    }
}

/// Reads a `VLED` file and, unless `normalize` is false, scales every vector
/// to unit length.
pub fn load_embeddings(path: impl AsRef<Path>, normalize: bool) -> Result<EmbeddingSet, StoreError> {
    let set = read_embeddings(path)?;
    Ok(if normalize { l2_normalize(&set) } else { set })
}
