use std::collections::{BTreeMap, HashMap};

use super::{ClassName, EmbeddingSet, Manifest, SampleId, SceneId, StoreError};

/// An embedding set joined with its manifest: every sample knows its scene and
/// every scene knows its samples.
#[derive(Debug, Clone)]
pub struct IndexedPool {
    set: EmbeddingSet,
    /// Sorted, distinct.
    scenes: Vec<SceneId>,
    sample_scene: Vec<usize>,
    scene_samples: Vec<Vec<usize>>,
    sample_class: Vec<Option<ClassName>>,
    sample_source: Vec<String>,
    by_id: HashMap<SampleId, usize>,
}

/// Joins a set with its manifest. Manifest entries for samples absent from the
/// set are ignored.
pub fn join_manifest(set: EmbeddingSet, manifest: &Manifest) -> Result<IndexedPool, StoreError> {
    manifest.check_unique()?;
    let entries: HashMap<&str, _> = manifest.entries.iter().map(|e| (e.sample_id.as_str(), e)).collect();

    let mut found = Vec::with_capacity(set.len());
    for id in set.ids() {
        let e = entries.get(id.as_str()).ok_or_else(|| StoreError::MissingManifestEntry(id.clone()))?;
        found.push(*e);
    }

    let mut scene_ix: BTreeMap<&SceneId, usize> = found.iter().map(|e| (&e.scene_id, 0)).collect();
    for (i, v) in scene_ix.values_mut().enumerate() {
        *v = i;
    }
    let scenes: Vec<SceneId> = scene_ix.keys().map(|s| (*s).clone()).collect();
    let mut scene_samples = vec![Vec::new(); scenes.len()];
    let sample_scene: Vec<usize> = found
        .iter()
        .enumerate()
        .map(|(i, e)| {
            let s = scene_ix[&e.scene_id];
            scene_samples[s].push(i);
            s
        })
        .collect();
    let by_id = set.ids().iter().cloned().enumerate().map(|(i, id)| (id, i)).collect();

    Ok(IndexedPool {
        sample_class: found.iter().map(|e| e.true_class.clone()).collect(),
        sample_source: found.iter().map(|e| e.source.clone()).collect(),
        set,
        scenes,
        sample_scene,
        scene_samples,
        by_id,
    })
}

impl IndexedPool {
    pub fn set(&self) -> &EmbeddingSet {
        &self.set
    }

    pub fn len(&self) -> usize {
        self.set.len()
    }

    pub fn is_empty(&self) -> bool {
        self.set.is_empty()
    }

    /// All scenes, sorted.
    pub fn scenes(&self) -> &[SceneId] {
        &self.scenes
    }

    pub fn sample_index(&self, id: &str) -> Option<usize> {
        self.by_id.get(id).copied()
    }

    /// Position of a sample's scene in [`IndexedPool::scenes`].
    pub fn scene_index_of(&self, sample: usize) -> usize {
        self.sample_scene[sample]
    }

    pub fn scene_index(&self, scene: &SceneId) -> Option<usize> {
        self.scenes.binary_search(scene).ok()
    }

    pub fn scene_of_index(&self, sample: usize) -> &SceneId {
        &self.scenes[self.sample_scene[sample]]
    }

    pub fn scene_of(&self, id: &str) -> Option<&SceneId> {
        self.sample_index(id).map(|i| self.scene_of_index(i))
    }

    /// Sample indices belonging to a scene, in set order.
    pub fn samples_of(&self, scene: &SceneId) -> &[usize] {
        match self.scenes.binary_search(scene) {
            Ok(s) => &self.scene_samples[s],
            Err(_) => &[],
        }
    }

    pub fn scene_to_samples(&self) -> impl Iterator<Item = (&SceneId, &[usize])> + '_ {
        self.scenes.iter().zip(self.scene_samples.iter().map(Vec::as_slice))
    }

    pub fn true_class(&self, sample: usize) -> Option<&ClassName> {
        self.sample_class[sample].as_ref()
    }

    pub fn source(&self, sample: usize) -> &str {
        &self.sample_source[sample]
    }

    /// Majority true class over a scene's samples, ties to the smallest name.
    pub fn scene_class(&self, scene: &SceneId) -> Option<&ClassName> {
        let mut counts: BTreeMap<&ClassName, usize> = BTreeMap::new();
        for &i in self.samples_of(scene) {
            if let Some(c) = self.true_class(i) {
                *counts.entry(c).or_default() += 1;
            }
        }
        let best = counts.values().copied().max()?;
        counts.into_iter().find(|&(_, n)| n == best).map(|(c, _)| c)
    }
}
