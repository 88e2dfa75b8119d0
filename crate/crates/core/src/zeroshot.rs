//! Closed-set class assignment by maximum dot product against label embeddings.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::embedding_store::{ClassName, EmbeddingSet, IdError, SampleId, StoreError};

/// Label vectors must be unit length within this tolerance.
pub const LABEL_NORM_TOLERANCE: f64 = 1e-6;

#[derive(Debug, thiserror::Error)]
pub enum ZeroShotError {
    #[error("image dimension {image} does not match label dimension {labels}")]
    DimMismatch { image: usize, labels: usize },
    #[error("label set is empty")]
    EmptyLabelSet,
    #[error("label {0} is not unit length")]
    NotNormalized(ClassName),
    #[error("label {0} appears more than once")]
    DuplicateLabel(ClassName),
    #[error("label name is the reserved {:?}", ClassName::UNASSIGNED)]
    ReservedLabel,
    #[error("invalid class name: {0}")]
    BadName(#[from] IdError),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error("invalid assignments: {0}")]
    Parse(String),
}

/// Text-label embeddings, one unit vector per class.
#[derive(Debug, Clone)]
pub struct LabelEmbeddingSet {
    names: Vec<ClassName>,
    set: EmbeddingSet,
}

impl LabelEmbeddingSet {
    /// Interprets a set's sample ids as class names.
    pub fn from_embeddings(set: EmbeddingSet) -> Result<Self, ZeroShotError> {
        let mut names = Vec::with_capacity(set.len());
        for (id, v) in set.iter() {
            let name = ClassName::new(id.as_str())?;
            if name.is_unassigned() {
                return Err(ZeroShotError::ReservedLabel);
            }
            let norm = v.iter().map(|&x| f64::from(x).powi(2)).sum::<f64>().sqrt();
            if (norm - 1.0).abs() > LABEL_NORM_TOLERANCE {
                return Err(ZeroShotError::NotNormalized(name));
            }
            names.push(name);
        }
        Ok(Self { names, set })
    }

    pub fn new(dim: usize, labels: Vec<(ClassName, Vec<f32>)>) -> Result<Self, ZeroShotError> {
        let mut records = Vec::with_capacity(labels.len());
        for (name, v) in labels {
            let id = SampleId::new(name.as_str())?;
            records.push((id, v));
        }
        match EmbeddingSet::new(dim, records) {
            Ok(set) => Self::from_embeddings(set),
            Err(StoreError::DuplicateId(id)) => Err(ZeroShotError::DuplicateLabel(ClassName::new(id.into_string())?)),
            Err(e) => Err(e.into()),
        }
    }

    pub fn dim(&self) -> usize {
        self.set.dim()
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn names(&self) -> &[ClassName] {
        &self.names
    }

    pub fn vector(&self, k: usize) -> &[f32] {
        self.set.vector(k)
    }
}

fn dot(a: &[f32], b: &[f32]) -> f64 {
    a.iter().zip(b).map(|(&x, &y)| f64::from(x) * f64::from(y)).sum()
}

/// Dot product of the image with every label, in label order.
pub fn similarity_scores(image: &[f32], labels: &LabelEmbeddingSet) -> Result<Vec<f64>, ZeroShotError> {
    if image.len() != labels.dim() {
        return Err(ZeroShotError::DimMismatch { image: image.len(), labels: labels.dim() });
    }
    Ok((0..labels.len()).map(|k| dot(image, labels.vector(k))).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Assignment {
    pub sample_id: SampleId,
    #[serde(rename = "class")]
    pub class: ClassName,
    pub score: f64,
}

/// One class per sample, in image order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ClassAssignment {
    pub assignments: Vec<Assignment>,
}

impl ClassAssignment {
    /// Sample ids grouped by assigned class. The reserved unassigned bucket is
    /// included when present.
    pub fn buckets(&self) -> BTreeMap<ClassName, Vec<SampleId>> {
        let mut out: BTreeMap<ClassName, Vec<SampleId>> = BTreeMap::new();
        for a in &self.assignments {
            out.entry(a.class.clone()).or_default().push(a.sample_id.clone());
        }
        out
    }

    pub fn write_jsonl(&self, mut w: impl Write) -> std::io::Result<()> {
        for a in &self.assignments {
            serde_json::to_writer(&mut w, a)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn read_jsonl(r: impl BufRead) -> Result<Self, ZeroShotError> {
        let mut assignments = Vec::new();
        for (n, line) in r.lines().enumerate() {
            let line = line.map_err(|e| ZeroShotError::Parse(e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            let a = serde_json::from_str(&line).map_err(|e| ZeroShotError::Parse(format!("line {}: {e}", n + 1)))?;
            assignments.push(a);
        }
        Ok(Self { assignments })
    }
}

fn assign_one(image: &[f32], labels: &LabelEmbeddingSet, min_score: Option<f64>) -> (ClassName, f64) {
    let mut best = 0;
    let mut best_score = f64::NEG_INFINITY;
    for k in 0..labels.len() {
        let s = dot(image, labels.vector(k));
        if s > best_score || (s == best_score && labels.names[k] < labels.names[best]) {
            best = k;
            best_score = s;
        }
    }
    match min_score {
        Some(t) if best_score < t => (ClassName::unassigned(), best_score),
        _ => (labels.names[best].clone(), best_score),
    }
}

/// Assigns every image to its highest-scoring label.
///
/// Exact score ties go to the lexicographically smallest class name. With
/// `min_score`, samples whose best score is below it land in
/// [`ClassName::UNASSIGNED`].
pub fn assign_classes(
    images: &EmbeddingSet,
    labels: &LabelEmbeddingSet,
    min_score: Option<f64>,
) -> Result<ClassAssignment, ZeroShotError> {
    if labels.is_empty() {
        return Err(ZeroShotError::EmptyLabelSet);
    }
    if images.dim() != labels.dim() {
        return Err(ZeroShotError::DimMismatch { image: images.dim(), labels: labels.dim() });
    }
    let one = |i: usize| {
        let (class, score) = assign_one(images.vector(i), labels, min_score);
        Assignment { sample_id: images.id(i).clone(), class, score }
    };
    #[cfg(feature = "parallel")]
    let assignments = {
        use rayon::prelude::*;
        (0..images.len()).into_par_iter().map(one).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let assignments = (0..images.len()).map(one).collect();
    Ok(ClassAssignment { assignments })
}
