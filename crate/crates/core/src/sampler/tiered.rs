use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::Rng as _;

use super::{PoolState, QuotaPlan, SampleError, Selection, SelectionReport, Strategy};
use crate::clustering::FlatClustering;
use crate::embedding_store::{ClassName, IndexedPool};
use crate::seed::{self, Rng};

struct Tier {
    size: usize,
    /// Remaining candidate samples per cluster, clusters in visiting order.
    clusters: Vec<Vec<usize>>,
    cursor: usize,
}

/// Resumable walk of one flat clustering under the tier policy. Scene
/// availability is read from `blocked` at every draw, so several walkers can
/// share one pool.
struct TierWalker {
    tiers: Vec<Tier>,
    current: usize,
    rng: Rng,
}

impl TierWalker {
    fn new(f: &FlatClustering, pool: &IndexedPool, mut rng: Rng) -> Result<Self, SampleError> {
        let mut by_size: BTreeMap<usize, Vec<Vec<usize>>> = BTreeMap::new();
        for c in &f.clusters {
            let members = c
                .iter()
                .map(|id| pool.sample_index(id.as_str()).ok_or_else(|| SampleError::UnknownSample(id.clone())))
                .collect::<Result<Vec<_>, _>>()?;
            by_size.entry(c.len()).or_default().push(members);
        }
        let tiers = by_size
            .into_iter()
            .map(|(size, mut clusters)| {
                clusters.shuffle(&mut rng);
                Tier { size, clusters, cursor: 0 }
            })
            .collect();
        Ok(Self { tiers, current: 0, rng })
    }

    /// Next (sample, tier) whose scene is not blocked, or `None` once every
    /// tier is exhausted.
    fn next(&mut self, pool: &IndexedPool, blocked: &[bool]) -> Option<(usize, usize)> {
        while let Some(tier) = self.tiers.get_mut(self.current) {
            while !tier.clusters.is_empty() {
                if tier.cursor >= tier.clusters.len() {
                    tier.cursor = 0;
                }
                let cluster = &mut tier.clusters[tier.cursor];
                cluster.retain(|&s| !blocked[pool.scene_index_of(s)]);
                if cluster.is_empty() {
                    tier.clusters.remove(tier.cursor);
                    continue;
                }
                let pick = self.rng.gen_range(0..cluster.len());
                let sample = cluster.swap_remove(pick);
                tier.cursor += 1;
                return Some((sample, tier.size));
            }
            self.current += 1;
        }
        None
    }
}

fn blocked_by_labels(pool: &IndexedPool, state: &PoolState) -> Vec<bool> {
    pool.scenes().iter().map(|s| state.is_labeled(s)).collect()
}

fn take(
    walker: &mut TierWalker,
    pool: &IndexedPool,
    blocked: &mut [bool],
    class: Option<&ClassName>,
) -> Option<Selection> {
    let (sample, tier) = walker.next(pool, blocked)?;
    let scene = pool.scene_index_of(sample);
    blocked[scene] = true;
    Some(Selection {
        scene: pool.scenes()[scene].clone(),
        via_sample: Some(pool.set().id(sample).clone()),
        tier: Some(tier),
        class: class.cloned(),
    })
}

/// Open-world exploring: tiered selection over one clustering of the
/// unlabeled pool.
pub fn select_owe(
    f: &FlatClustering,
    pool: &IndexedPool,
    state: &PoolState,
    budget: usize,
    seed: u64,
) -> Result<SelectionReport, SampleError> {
    if budget == 0 {
        return Err(SampleError::BudgetNonPositive);
    }
    if f.n_samples() == 0 {
        return Err(SampleError::EmptyPool);
    }
    let mut walker = TierWalker::new(f, pool, seed::rng(seed))?;
    let mut blocked = blocked_by_labels(pool, state);
    let mut selections = Vec::with_capacity(budget);
    while selections.len() < budget {
        match take(&mut walker, pool, &mut blocked, None) {
            Some(s) => selections.push(s),
            None => break,
        }
    }
    Ok(SelectionReport {
        strategy: Strategy::Owe,
        seed,
        budget,
        exhausted: selections.len() < budget,
        selections,
        quota: None,
    })
}

/// Closed-world mining: an even per-class quota (remainder to classes in
/// seeded order), tiered selection inside each class, and round-robin
/// redistribution of quota that exhausted classes could not fill.
///
/// The reserved unassigned bucket is ignored.
pub fn select_cwm(
    per_class: &BTreeMap<ClassName, FlatClustering>,
    pool: &IndexedPool,
    state: &PoolState,
    budget: usize,
    seed: u64,
) -> Result<SelectionReport, SampleError> {
    if budget == 0 {
        return Err(SampleError::BudgetNonPositive);
    }
    let classes: Vec<(&ClassName, &FlatClustering)> = per_class.iter().filter(|(c, _)| !c.is_unassigned()).collect();
    if classes.is_empty() {
        return Err(SampleError::NoClasses);
    }

    let mut rng = seed::rng(seed);
    let mut order: Vec<usize> = (0..classes.len()).collect();
    order.shuffle(&mut rng);
    let (base, rem) = (budget / classes.len(), budget % classes.len());
    let mut target = vec![base; classes.len()];
    for &k in &order[..rem] {
        target[k] += 1;
    }

    let mut walkers = classes
        .iter()
        .enumerate()
        .map(|(k, (_, f))| TierWalker::new(f, pool, seed::rng(seed::derive(seed, k as u64 + 1))))
        .collect::<Result<Vec<_>, _>>()?;
    let mut blocked = blocked_by_labels(pool, state);
    let mut selections = Vec::with_capacity(budget);

    for &k in &order {
        for _ in 0..target[k] {
            match take(&mut walkers[k], pool, &mut blocked, Some(classes[k].0)) {
                Some(s) => selections.push(s),
                None => break,
            }
        }
    }

    let mut alive = vec![true; classes.len()];
    while selections.len() < budget && alive.iter().any(|&a| a) {
        for &k in &order {
            if selections.len() == budget {
                break;
            }
            if !alive[k] {
                continue;
            }
            match take(&mut walkers[k], pool, &mut blocked, Some(classes[k].0)) {
                Some(s) => selections.push(s),
                None => alive[k] = false,
            }
        }
    }

    let targets = classes.iter().zip(&target).map(|((c, _), &t)| ((*c).clone(), t)).collect();
    Ok(SelectionReport {
        strategy: Strategy::Cwm,
        seed,
        budget,
        exhausted: selections.len() < budget,
        selections,
        quota: Some(QuotaPlan { targets }),
    })
}
