#![allow(dead_code)]

use std::collections::{BTreeSet, HashMap};

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;

use visled::clustering::FlatClustering;
use visled::embedding_store::{
    join_manifest, ClassName, EmbeddingSet, IndexedPool, Manifest, ManifestEntry, SampleId, SceneId,
};
use visled::sampler::{PoolState, SelectionReport};

/// Unit vectors drawn around a few random centres so that some, but not all,
/// pairs fall under typical thresholds. `quantize` rounds components before
/// normalising, which produces exact distance ties.
pub fn random_unit_set(rng: &mut impl Rng, n: usize, dim: usize, quantize: bool) -> EmbeddingSet {
    let centres: Vec<Vec<f64>> =
        (0..rng.gen_range(1..=4)).map(|_| (0..dim).map(|_| rng.sample(StandardNormal)).collect()).collect();
    let spread: f64 = rng.gen_range(0.05..0.8);
    let mut ids: Vec<usize> = (0..n).collect();
    ids.shuffle(rng);
    let records = ids
        .into_iter()
        .map(|i| {
            let c = centres.choose(rng).unwrap();
            let v: Vec<f64> = c.iter().map(|x| x + spread * rng.sample::<f64, _>(StandardNormal)).collect();
            let mut v: Vec<f64> = if quantize { v.iter().map(|x| x.round()).collect() } else { v };
            if v.iter().all(|x| *x == 0.0) {
                v[i % dim] = 1.0;
            }
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            v.iter_mut().for_each(|x| *x /= norm);
            (SampleId::new(format!("s{i:03}")).unwrap(), v.into_iter().map(|x| x as f32).collect())
        })
        .collect();
    EmbeddingSet::new(dim, records).unwrap()
}

/// Partition as a set of sets of ids, independent of any ordering.
pub fn partition_of(f: &FlatClustering) -> BTreeSet<BTreeSet<String>> {
    f.clusters.iter().map(|c| c.iter().map(|s| s.to_string()).collect()).collect()
}

/// A pool of `n_samples` samples spread over `n_scenes` scenes (every scene
/// gets at least one sample), with a 1-d dummy embedding.
pub fn random_pool(rng: &mut impl Rng, n_samples: usize, n_scenes: usize) -> (IndexedPool, Manifest) {
    assert!(n_scenes >= 1 && n_samples >= n_scenes);
    let mut scene_of: Vec<usize> = (0..n_scenes).collect();
    scene_of.extend((n_scenes..n_samples).map(|_| rng.gen_range(0..n_scenes)));
    scene_of.shuffle(rng);
    let mut entries = Vec::new();
    let mut records = Vec::new();
    for (i, s) in scene_of.iter().enumerate() {
        let id = SampleId::new(format!("x{i:04}")).unwrap();
        records.push((id.clone(), vec![1.0f32]));
        entries.push(ManifestEntry {
            sample_id: id,
            scene_id: SceneId::new(format!("scene-{s:04}")).unwrap(),
            source: "CAM_FRONT".into(),
            true_class: Some(ClassName::new(format!("c{}", s % 3)).unwrap()),
        });
    }
    let m = Manifest::new(entries);
    (join_manifest(EmbeddingSet::new(1, records).unwrap(), &m).unwrap(), m)
}

/// Random partition of the given sample ids into clusters of varied sizes.
pub fn random_clustering(rng: &mut impl Rng, ids: &[SampleId]) -> FlatClustering {
    let mut ids = ids.to_vec();
    ids.shuffle(rng);
    let mut clusters = Vec::new();
    let mut rest = &ids[..];
    while !rest.is_empty() {
        let take = rng.gen_range(1..=rest.len().min(6));
        clusters.push(rest[..take].to_vec());
        rest = &rest[take..];
    }
    FlatClustering::from_clusters(0.15, clusters)
}

/// Checks an owe report against the tier policy, returning a description of
/// the first violation.
///
/// * tiers are non-decreasing and each equals the size of the cluster the
///   sample came from;
/// * when a tier-`t` pick is made, every cluster smaller than `t` has no
///   sample left in an unblocked scene;
/// * no scene is picked twice or was already labeled;
/// * the report size is `min(budget, scenes reachable through the clustering)`.
pub fn check_tier_policy(
    f: &FlatClustering,
    pool: &IndexedPool,
    state: &PoolState,
    budget: usize,
    report: &SelectionReport,
) -> Result<(), String> {
    let size_of: HashMap<&SampleId, usize> =
        f.clusters.iter().flat_map(|c| c.iter().map(move |s| (s, c.len()))).collect();
    let mut blocked: BTreeSet<SceneId> = state.labeled.clone();
    let mut last_tier = 0;
    for (k, sel) in report.selections.iter().enumerate() {
        let tier = sel.tier.ok_or("selection without tier")?;
        let via = sel.via_sample.as_ref().ok_or("selection without sample")?;
        if size_of.get(via) != Some(&tier) {
            return Err(format!("pick {k}: tier {tier} but cluster size {:?}", size_of.get(via)));
        }
        if pool.scene_of(via.as_str()) != Some(&sel.scene) {
            return Err(format!("pick {k}: sample {via} is not in scene {}", sel.scene));
        }
        if tier < last_tier {
            return Err(format!("pick {k}: tier went from {last_tier} to {tier}"));
        }
        last_tier = tier;
        for c in f.clusters.iter().filter(|c| c.len() < tier) {
            if let Some(s) = c.iter().find(|s| !blocked.contains(pool.scene_of(s.as_str()).unwrap())) {
                return Err(format!("pick {k} at tier {tier} while smaller cluster still offers {s}"));
            }
        }
        if !blocked.insert(sel.scene.clone()) {
            return Err(format!("pick {k}: scene {} repeated or already labeled", sel.scene));
        }
    }
    let reachable: BTreeSet<&SceneId> = f
        .clusters
        .iter()
        .flatten()
        .map(|s| pool.scene_of(s.as_str()).unwrap())
        .filter(|s| !state.is_labeled(s))
        .collect();
    let expected = budget.min(reachable.len());
    if report.selections.len() != expected {
        return Err(format!("size {} but min(budget, available) = {expected}", report.selections.len()));
    }
    Ok(())
}

/// Replays a dendrogram and checks each merge against average distances
/// recomputed from the points: the merged pair must be at the reported
/// height and no other pair of current clusters may be closer, both within
/// `tol`. Valid for any tie-breaking, unlike comparing two dendrograms.
pub fn check_greedy_average(set: &EmbeddingSet, d: &visled::clustering::Dendrogram, tol: f64) -> Result<(), String> {
    let n = set.len();
    let point: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    let dot: f64 = set.vector(i).iter().zip(set.vector(j)).map(|(a, b)| *a as f64 * *b as f64).sum();
                    (1.0 - dot).clamp(0.0, 2.0)
                })
                .collect()
        })
        .collect();
    let avg = |a: &[usize], b: &[usize]| {
        a.iter().flat_map(|&i| b.iter().map(move |&j| (i, j))).map(|(i, j)| point[i][j]).sum::<f64>()
            / (a.len() * b.len()) as f64
    };
    let mut members: Vec<Option<Vec<usize>>> = (0..n).map(|i| Some(vec![i])).collect();
    for (t, m) in d.merges.iter().enumerate() {
        let (Some(Some(a)), Some(Some(b))) = (members.get(m.left), members.get(m.right)) else {
            return Err(format!("merge {t} uses an inactive node"));
        };
        let h = avg(a, b);
        if (h - m.height).abs() > tol {
            return Err(format!("merge {t}: height {} but average distance {h}", m.height));
        }
        let active: Vec<&Vec<usize>> = members.iter().flatten().collect();
        for x in 0..active.len() {
            for y in x + 1..active.len() {
                let other = avg(active[x], active[y]);
                if other < h - tol {
                    return Err(format!("merge {t} at {h} while a pair at {other} was available"));
                }
            }
        }
        let mut joined = a.clone();
        joined.extend(b);
        members[m.left] = None;
        members[m.right] = None;
        members.push(Some(joined));
    }
    Ok(())
}
