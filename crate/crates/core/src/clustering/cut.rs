use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use super::{ClusterError, Dendrogram};
use crate::embedding_store::SampleId;

/// Partition of samples produced by cutting a dendrogram at a distance
/// threshold. Members are sorted by id and clusters by their first member, so
/// the value does not depend on record order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlatClustering {
    pub threshold: f64,
    pub clusters: Vec<Vec<SampleId>>,
}

impl FlatClustering {
    /// Canonicalises an arbitrary partition.
    pub fn from_clusters(threshold: f64, mut clusters: Vec<Vec<SampleId>>) -> Self {
        clusters.retain(|c| !c.is_empty());
        for c in &mut clusters {
            c.sort();
        }
        clusters.sort_by(|a, b| a[0].cmp(&b[0]));
        Self { threshold, clusters }
    }

    pub fn len(&self) -> usize {
        self.clusters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clusters.is_empty()
    }

    pub fn n_samples(&self) -> usize {
        self.clusters.iter().map(Vec::len).sum()
    }

    /// Cluster index of every sample.
    pub fn labels(&self) -> HashMap<&SampleId, usize> {
        self.clusters.iter().enumerate().flat_map(|(k, c)| c.iter().map(move |id| (id, k))).collect()
    }

    /// Drops samples for which `keep` is false; emptied clusters vanish and
    /// the remaining sizes shrink accordingly.
    pub fn restrict(&self, mut keep: impl FnMut(&SampleId) -> bool) -> Self {
        let clusters = self.clusters.iter().map(|c| c.iter().filter(|id| keep(id)).cloned().collect()).collect();
        Self::from_clusters(self.threshold, clusters)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("clustering serialises")
    }
}

/// Leaf-index partition obtained by applying every merge with height at most
/// `threshold`.
pub fn cut_partition(d: &Dendrogram, threshold: f64) -> Vec<Vec<usize>> {
    let n = d.n;
    let mut parent: Vec<usize> = (0..2 * n.max(1) - 1).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for (t, m) in d.merges.iter().enumerate() {
        if m.height <= threshold {
            let node = n + t;
            parent[m.left] = node;
            parent[m.right] = node;
        }
    }
    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for leaf in 0..n {
        let root = find(&mut parent, leaf);
        groups.entry(root).or_default().push(leaf);
    }
    let mut out: Vec<Vec<usize>> = groups.into_values().collect();
    out.sort_by_key(|g| g[0]);
    out
}

/// Flat clusters over `ids` (the dendrogram's leaves, in leaf order).
pub fn cut_at(d: &Dendrogram, ids: &[SampleId], threshold: f64) -> Result<FlatClustering, ClusterError> {
    if !(threshold >= 0.0) || !threshold.is_finite() {
        return Err(ClusterError::InvalidThreshold(threshold));
    }
    if ids.len() != d.n {
        return Err(ClusterError::LeafCountMismatch { leaves: d.n, ids: ids.len() });
    }
    let clusters =
        cut_partition(d, threshold).into_iter().map(|g| g.into_iter().map(|i| ids[i].clone()).collect()).collect();
    Ok(FlatClustering::from_clusters(threshold, clusters))
}

/// Number of clusters of each size.
pub fn size_histogram(f: &FlatClustering) -> BTreeMap<usize, usize> {
    let mut h = BTreeMap::new();
    for c in &f.clusters {
        *h.entry(c.len()).or_insert(0) += 1;
    }
    h
}

#[cfg(test)]
mod tests {
    use super::super::Merge;
    use super::*;

    fn ids(n: usize) -> Vec<SampleId> {
        (0..n).map(|i| SampleId::new(format!("s{i}")).unwrap()).collect()
    }

    fn chain(n: usize) -> Dendrogram {
        // ((0,1),2),3 ... at heights 0.1, 0.2, ...
        let mut merges = Vec::new();
        let mut prev = 0;
        for t in 0..n - 1 {
            let right = t + 1;
            merges.push(Merge {
                left: prev.min(right),
                right: prev.max(right),
                height: 0.1 * (t + 1) as f64,
                size: t + 2,
            });
            prev = n + t;
        }
        Dendrogram { n, merges }
    }

    #[test]
    fn below_min_gives_singletons() {
        let f = cut_at(&chain(5), &ids(5), 0.05).unwrap();
        assert_eq!(f.len(), 5);
        assert_eq!(size_histogram(&f), BTreeMap::from([(1, 5)]));
    }

    #[test]
    fn above_max_gives_one_cluster() {
        let f = cut_at(&chain(5), &ids(5), 10.0).unwrap();
        assert_eq!(f.len(), 1);
        assert_eq!(size_histogram(&f), BTreeMap::from([(5, 1)]));
    }

    #[test]
    fn partial_cut() {
        let f = cut_at(&chain(5), &ids(5), 0.25).unwrap();
        assert_eq!(size_histogram(&f), BTreeMap::from([(1, 2), (3, 1)]));
        assert_eq!(f.n_samples(), 5);
    }

    #[test]
    fn rejects_bad_arguments() {
        assert!(matches!(cut_at(&chain(3), &ids(3), -1.0), Err(ClusterError::InvalidThreshold(_))));
        assert!(matches!(cut_at(&chain(3), &ids(3), f64::NAN), Err(ClusterError::InvalidThreshold(_))));
        assert!(matches!(cut_at(&chain(3), &ids(4), 0.1), Err(ClusterError::LeafCountMismatch { .. })));
    }

    #[test]
    fn restrict_shrinks_and_drops() {
        let f = cut_at(&chain(4), &ids(4), 0.15).unwrap();
        let r = f.restrict(|id| id.as_str() != "s0" && id.as_str() != "s3");
        assert_eq!(r.clusters, vec![vec![ids(4)[1].clone()], vec![ids(4)[2].clone()]]);
    }

    #[test]
    fn json_shape() {
        let f = cut_at(&chain(2), &ids(2), 0.5).unwrap();
        assert_eq!(f.to_json(), r#"{"threshold":0.5,"clusters":[["s0","s1"]]}"#);
    }
}
