use std::collections::HashSet;

use super::{SampleId, StoreError};

/// Vectors within this distance of unit norm are left untouched by
/// [`l2_normalize`], which makes normalisation idempotent at f32 precision.
pub const NORM_TOLERANCE: f64 = 1e-6;

/// An ordered collection of `dim`-dimensional vectors keyed by unique sample ids.
///
/// Components are stored as f32 (the on-disk precision); every computation
/// over them accumulates in f64.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingSet {
    dim: usize,
    ids: Vec<SampleId>,
    data: Vec<f32>,
}

impl EmbeddingSet {
    pub fn empty(dim: usize) -> Result<Self, StoreError> {
        Self::from_parts(dim, Vec::new(), Vec::new())
    }

    pub fn new(dim: usize, records: Vec<(SampleId, Vec<f32>)>) -> Result<Self, StoreError> {
        let mut ids = Vec::with_capacity(records.len());
        let mut data = Vec::with_capacity(records.len() * dim);
        for (id, v) in records {
            if v.len() != dim {
                return Err(StoreError::DimMismatch { id, expected: dim, found: v.len() });
            }
            ids.push(id);
            data.extend_from_slice(&v);
        }
        Self::from_parts(dim, ids, data)
    }

    /// Builds a set from ids and a row-major component buffer.
    pub fn from_parts(dim: usize, ids: Vec<SampleId>, data: Vec<f32>) -> Result<Self, StoreError> {
        if dim == 0 {
            return Err(StoreError::ZeroDimension);
        }
        if data.len() != ids.len() * dim {
            return Err(StoreError::BufferLength { expected: ids.len() * dim, found: data.len() });
        }
        let mut seen = HashSet::with_capacity(ids.len());
        for (i, id) in ids.iter().enumerate() {
            if !seen.insert(id.as_str()) {
                return Err(StoreError::DuplicateId(id.clone()));
            }
            let row = &data[i * dim..(i + 1) * dim];
            if let Some(component) = row.iter().position(|x| !x.is_finite()) {
                return Err(StoreError::NonFiniteComponent { id: id.clone(), component });
            }
            if row.iter().all(|&x| x == 0.0) {
                return Err(StoreError::ZeroVector(id.clone()));
            }
        }
        Ok(Self { dim, ids, data })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[SampleId] {
        &self.ids
    }

    pub fn id(&self, i: usize) -> &SampleId {
        &self.ids[i]
    }

    pub fn vector(&self, i: usize) -> &[f32] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    /// Row-major component buffer.
    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn iter(&self) -> impl ExactSizeIterator<Item = (&SampleId, &[f32])> + '_ {
        self.ids.iter().zip(self.data.chunks_exact(self.dim))
    }

    pub fn position(&self, id: &str) -> Option<usize> {
        self.ids.iter().position(|x| x.as_str() == id)
    }

    /// New set holding the given records, in the given order.
    pub fn subset(&self, indices: &[usize]) -> EmbeddingSet {
        let mut ids = Vec::with_capacity(indices.len());
        let mut data = Vec::with_capacity(indices.len() * self.dim);
        for &i in indices {
            ids.push(self.ids[i].clone());
            data.extend_from_slice(self.vector(i));
        }
        EmbeddingSet { dim: self.dim, ids, data }
    }

    /// True when every vector's L2 norm is within `tol` of one.
    pub fn is_normalized(&self, tol: f64) -> bool {
        self.data.chunks_exact(self.dim).all(|v| (norm(v) - 1.0).abs() <= tol)
    }
}

pub(crate) fn norm(v: &[f32]) -> f64 {
    v.iter().map(|&x| f64::from(x) * f64::from(x)).sum::<f64>().sqrt()
}

/// Scales every vector to unit L2 norm. Ids and order are preserved.
///
/// The set invariants already exclude zero vectors, so this cannot fail.
pub fn l2_normalize(set: &EmbeddingSet) -> EmbeddingSet {
    let mut data = set.data.clone();
    for row in data.chunks_exact_mut(set.dim) {
        let n = norm(row);
        if (n - 1.0).abs() <= NORM_TOLERANCE {
            continue;
        }
        for x in row.iter_mut() {
            *x = (f64::from(*x) / n) as f32;
        }
    }
    EmbeddingSet { dim: set.dim, ids: set.ids.clone(), data }
}
