//! Exact agglomerative clustering under cosine distance and flat cuts of the
//! resulting dendrogram.
//!
//! [`linkage`] is the production path (nearest-neighbour chain with
//! Lance–Williams updates, O(n²) time and memory). [`brute_force_linkage`]
//! recomputes every cluster-pair average from point distances at every step
//! and exists to check the former.

mod cut;
mod nnchain;
mod oracle;

use serde::{Deserialize, Serialize};

use crate::embedding_store::{EmbeddingSet, SampleId};

pub use cut::{cut_at, cut_partition, size_histogram, FlatClustering};
pub use nnchain::linkage;
pub use oracle::{brute_force_linkage, ORACLE_MAX_N};

/// Default flat-cut distance threshold.
pub const DEFAULT_THRESHOLD: f64 = 0.15;

/// Input vectors must be unit length within this tolerance.
pub const UNIT_TOLERANCE: f64 = 1e-6;

#[derive(Debug, thiserror::Error)]
pub enum ClusterError {
    #[error("cannot cluster an empty set")]
    EmptySet,
    #[error("vector {0} is not unit length")]
    NotNormalized(SampleId),
    #[error("oracle refuses n = {0} (limit {ORACLE_MAX_N})")]
    TooLargeForOracle(usize),
    #[error("threshold must be a non-negative finite number, got {0}")]
    InvalidThreshold(f64),
    #[error("dendrogram has {leaves} leaves but {ids} ids were supplied")]
    LeafCountMismatch { leaves: usize, ids: usize },
    #[error("malformed dendrogram: {0}")]
    InvalidDendrogram(String),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    /// `1 - dot(a, b)` on unit vectors.
    #[default]
    Cosine,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Linkage {
    #[default]
    Average,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DistanceSpec {
    pub metric: Metric,
    pub linkage: Linkage,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Merge {
    pub left: usize,
    pub right: usize,
    pub height: f64,
    pub size: usize,
}

/// Stepwise dendrogram. Leaves are nodes `0..n`; merge `t` creates node `n + t`.
/// Merges are stored in non-decreasing height order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dendrogram {
    pub n: usize,
    pub merges: Vec<Merge>,
}

impl Dendrogram {
    pub fn heights(&self) -> Vec<f64> {
        self.merges.iter().map(|m| m.height).collect()
    }

    /// Checks the structural invariants: `n - 1` merges, every node used as a
    /// child exactly once, consistent sizes, children created before parents,
    /// and heights sorted.
    pub fn validate(&self) -> Result<(), ClusterError> {
        let bad = |msg: String| Err(ClusterError::InvalidDendrogram(msg));
        if self.n == 0 {
            return bad("no leaves".into());
        }
        if self.merges.len() != self.n - 1 {
            return bad(format!("{} merges for {} leaves", self.merges.len(), self.n));
        }
        let mut size = vec![1usize; self.n];
        let mut used = vec![false; 2 * self.n - 1];
        let mut last = f64::NEG_INFINITY;
        for (t, m) in self.merges.iter().enumerate() {
            let node = self.n + t;
            for child in [m.left, m.right] {
                if child >= node {
                    return bad(format!("merge {t} references node {child} before it exists"));
                }
                if std::mem::replace(&mut used[child], true) {
                    return bad(format!("node {child} merged twice"));
                }
            }
            if m.left == m.right {
                return bad(format!("merge {t} joins node {} with itself", m.left));
            }
            let s = size[m.left] + size[m.right];
            if s != m.size {
                return bad(format!("merge {t} has size {} but children sum to {s}", m.size));
            }
            if !(m.height >= last) || !m.height.is_finite() {
                return bad(format!("merge {t} height {} out of order", m.height));
            }
            last = m.height;
            size.push(s);
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("dendrogram serialises")
    }
}

pub(crate) fn check_input(set: &EmbeddingSet) -> Result<(), ClusterError> {
    if set.is_empty() {
        return Err(ClusterError::EmptySet);
    }
    for (id, v) in set.iter() {
        let norm = v.iter().map(|&x| f64::from(x).powi(2)).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > UNIT_TOLERANCE {
            return Err(ClusterError::NotNormalized(id.clone()));
        }
    }
    Ok(())
}

/// Rank of each sample id in lexicographic order. Used for tie-breaking so
/// results do not depend on record order.
pub(crate) fn id_ranks(ids: &[SampleId]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..ids.len()).collect();
    order.sort_by(|&a, &b| ids[a].cmp(&ids[b]));
    let mut rank = vec![0; ids.len()];
    for (r, i) in order.into_iter().enumerate() {
        rank[i] = r;
    }
    rank
}
