use super::{check_input, id_ranks, ClusterError, Dendrogram, DistanceSpec, Merge};
use crate::embedding_store::EmbeddingSet;

/// Condensed upper-triangular pairwise distance matrix.
struct Condensed {
    n: usize,
    d: Vec<f64>,
}

impl Condensed {
    #[inline]
    fn index(&self, i: usize, j: usize) -> usize {
        let (i, j) = if i < j { (i, j) } else { (j, i) };
        self.n * i - i * (i + 1) / 2 + j - i - 1
    }

    #[inline]
    fn get(&self, i: usize, j: usize) -> f64 {
        self.d[self.index(i, j)]
    }

    #[inline]
    fn set(&mut self, i: usize, j: usize, v: f64) {
        let k = self.index(i, j);
        self.d[k] = v;
    }
}

fn cosine_row(set: &EmbeddingSet, i: usize, row: &mut [f64]) {
    let a = set.vector(i);
    for (k, out) in row.iter_mut().enumerate() {
        let b = set.vector(i + 1 + k);
        let dot: f64 = a.iter().zip(b).map(|(&x, &y)| f64::from(x) * f64::from(y)).sum();
        *out = (1.0 - dot).clamp(0.0, 2.0);
    }
}

fn pairwise_cosine(set: &EmbeddingSet) -> Condensed {
    let n = set.len();
    let mut d = vec![0.0; n * n.saturating_sub(1) / 2];
    let mut rows = Vec::with_capacity(n);
    let mut rest = d.as_mut_slice();
    for i in 0..n.saturating_sub(1) {
        let (row, tail) = rest.split_at_mut(n - 1 - i);
        rows.push((i, row));
        rest = tail;
    }
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        rows.into_par_iter().for_each(|(i, row)| cosine_row(set, i, row));
    }
    #[cfg(not(feature = "parallel"))]
    for (i, row) in rows {
        cosine_row(set, i, row);
    }
    Condensed { n, d }
}

/// Average-linkage dendrogram by the nearest-neighbour chain.
///
/// Nearest-neighbour ties go to the cluster whose smallest member id sorts
/// first, which makes the output independent of record order.
pub fn linkage(set: &EmbeddingSet, _spec: DistanceSpec) -> Result<Dendrogram, ClusterError> {
    check_input(set)?;
    let n = set.len();
    let mut dist = pairwise_cosine(set);

    // Each live cluster occupies the slot of one of its leaves.
    let mut key = id_ranks(set.ids());
    let mut size = vec![1usize; n];
    let mut floor = vec![0.0f64; n];
    let mut active: Vec<usize> = (0..n).collect();
    let mut slot_pos: Vec<usize> = (0..n).collect();
    let mut chain: Vec<usize> = Vec::with_capacity(n);
    let mut steps: Vec<(usize, usize, f64)> = Vec::with_capacity(n.saturating_sub(1));

    while active.len() > 1 {
        if chain.is_empty() {
            let start = *active.iter().min_by_key(|&&s| key[s]).unwrap();
            chain.push(start);
        }
        let (a, b) = loop {
            let a = *chain.last().unwrap();
            let prev = chain.len().checked_sub(2).map(|i| chain[i]);
            let mut best = usize::MAX;
            let mut best_d = f64::INFINITY;
            for &c in &active {
                if c == a {
                    continue;
                }
                let dc = dist.get(a, c);
                if best == usize::MAX || dc < best_d || (dc == best_d && key[c] < key[best]) {
                    best = c;
                    best_d = dc;
                }
            }
            if Some(best) == prev {
                chain.pop();
                chain.pop();
                break (a, best);
            }
            chain.push(best);
        };

        // Rounding in the update can leave a parent a hair below a child;
        // clamp so sorting by height stays a topological order.
        let height = dist.get(a, b).max(floor[a]).max(floor[b]);
        let (sa, sb) = (size[a] as f64, size[b] as f64);
        for &k in &active {
            if k != a && k != b {
                let v = (sa * dist.get(k, a) + sb * dist.get(k, b)) / (sa + sb);
                dist.set(k, b, v);
            }
        }
        size[b] += size[a];
        key[b] = key[b].min(key[a]);
        floor[b] = height;
        let pos = slot_pos[a];
        active.swap_remove(pos);
        if pos < active.len() {
            slot_pos[active[pos]] = pos;
        }
        steps.push((a, b, height));
    }
    Ok(from_steps(n, &steps))
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        Self { parent: (0..n).collect() }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }
}

/// Sorts merges by height (stable) and relabels them as dendrogram nodes.
/// `steps` hold one leaf of each merged cluster.
fn from_steps(n: usize, steps: &[(usize, usize, f64)]) -> Dendrogram {
    let mut order: Vec<usize> = (0..steps.len()).collect();
    order.sort_by(|&x, &y| steps[x].2.total_cmp(&steps[y].2).then(x.cmp(&y)));

    let mut uf = UnionFind::new(n);
    let mut label: Vec<usize> = (0..n).collect();
    let mut size = vec![1usize; n];
    let mut merges = Vec::with_capacity(steps.len());
    for (t, &s) in order.iter().enumerate() {
        let (a, b, height) = steps[s];
        let (ra, rb) = (uf.find(a), uf.find(b));
        let (la, lb) = (label[ra], label[rb]);
        let merged = size[ra] + size[rb];
        uf.parent[ra] = rb;
        label[rb] = n + t;
        size[rb] = merged;
        merges.push(Merge { left: la.min(lb), right: la.max(lb), height, size: merged });
    }
    Dendrogram { n, merges }
}
