use super::{check_input, id_ranks, ClusterError, Dendrogram, DistanceSpec, Merge};
use crate::embedding_store::EmbeddingSet;

/// Largest input the brute-force oracle accepts.
pub const ORACLE_MAX_N: usize = 512;

struct Cluster {
    node: usize,
    members: Vec<usize>,
    key: usize,
}

/// Naive O(n³) agglomerative clustering: at every step the average distance of
/// every cluster pair is recomputed from the point distances and the global
/// minimum is merged. Pair ties are broken by the (smaller, larger) pair of
/// minimum-member id ranks.
pub fn brute_force_linkage(set: &EmbeddingSet, _spec: DistanceSpec) -> Result<Dendrogram, ClusterError> {
    check_input(set)?;
    let n = set.len();
    if n > ORACLE_MAX_N {
        return Err(ClusterError::TooLargeForOracle(n));
    }

    let mut point = vec![vec![0.0f64; n]; n];
    #[allow(clippy::needless_range_loop)]
    for i in 0..n {
        for j in 0..n {
            let dot: f64 = set.vector(i).iter().zip(set.vector(j)).map(|(&x, &y)| f64::from(x) * f64::from(y)).sum();
            point[i][j] = (1.0 - dot).clamp(0.0, 2.0);
        }
    }

    let rank = id_ranks(set.ids());
    let mut clusters: Vec<Cluster> = (0..n).map(|i| Cluster { node: i, members: vec![i], key: rank[i] }).collect();
    let mut merges = Vec::with_capacity(n - 1);

    while clusters.len() > 1 {
        let mut best: Option<(f64, (usize, usize), usize, usize)> = None;
        for p in 0..clusters.len() {
            for q in p + 1..clusters.len() {
                let (cp, cq) = (&clusters[p], &clusters[q]);
                let mut sum = 0.0;
                for &i in &cp.members {
                    for &j in &cq.members {
                        sum += point[i][j];
                    }
                }
                let avg = sum / (cp.members.len() * cq.members.len()) as f64;
                let keys = (cp.key.min(cq.key), cp.key.max(cq.key));
                let better = match best {
                    None => true,
                    Some((d, k, _, _)) => avg < d || (avg == d && keys < k),
                };
                if better {
                    best = Some((avg, keys, p, q));
                }
            }
        }
        let (height, _, p, q) = best.unwrap();
        let cq = clusters.swap_remove(q);
        let cp = clusters.swap_remove(p);
        let mut members = cp.members;
        members.extend(cq.members);
        merges.push(Merge { left: cp.node.min(cq.node), right: cp.node.max(cq.node), height, size: members.len() });
        clusters.push(Cluster { node: n + merges.len() - 1, members, key: cp.key.min(cq.key) });
    }
    Ok(Dendrogram { n, merges })
}
