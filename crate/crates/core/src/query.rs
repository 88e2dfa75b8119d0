//! One acquisition round end to end: restrict to the unlabeled pool, cluster
//! (globally or per class), and select under the requested strategy.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::clustering::{self, cut_at, linkage, DistanceSpec, FlatClustering};
use crate::embedding_store::{ClassName, IndexedPool, SampleId};
use crate::sampler::{
    select_cwm, select_external_score, select_owe, select_random, PoolState, SampleError, SelectionReport, Strategy,
};
use crate::zeroshot::ClassAssignment;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QueryOptions {
    /// Flat-cut distance threshold.
    pub threshold: f64,
    pub distance: DistanceSpec,
    /// Re-cluster the remaining unlabeled pool every round. When false, the
    /// full pool is clustered once and later rounds only drop labeled samples.
    pub recluster: bool,
    /// Classes mined by `cwm`. Defaults to every class present.
    pub classes: Option<Vec<ClassName>>,
}

impl Default for QueryOptions {
    fn default() -> Self {
        Self {
            threshold: clustering::DEFAULT_THRESHOLD,
            distance: DistanceSpec::default(),
            recluster: true,
            classes: None,
        }
    }
}

pub struct QueryEngine<'a> {
    pool: &'a IndexedPool,
    options: QueryOptions,
    sample_class: Option<Vec<Option<ClassName>>>,
    scores: Option<&'a HashMap<SampleId, f64>>,
    frozen_owe: OnceLock<FlatClustering>,
    frozen_cwm: OnceLock<BTreeMap<ClassName, FlatClustering>>,
}

impl<'a> QueryEngine<'a> {
    pub fn new(pool: &'a IndexedPool, options: QueryOptions) -> Self {
        Self {
            pool,
            options,
            sample_class: None,
            scores: None,
            frozen_owe: OnceLock::new(),
            frozen_cwm: OnceLock::new(),
        }
    }

    /// Uses the manifest's ground-truth classes in place of zero-shot output.
    pub fn with_true_classes(mut self) -> Self {
        self.sample_class = Some((0..self.pool.len()).map(|i| self.pool.true_class(i).cloned()).collect());
        self
    }

    /// Uses zero-shot output. Samples missing from it, or unassigned, are not
    /// mined.
    pub fn with_assignment(mut self, a: &ClassAssignment) -> Self {
        let by_id: HashMap<&SampleId, &ClassName> = a.assignments.iter().map(|x| (&x.sample_id, &x.class)).collect();
        self.sample_class = Some(
            self.pool
                .set()
                .ids()
                .iter()
                .map(|id| by_id.get(id).filter(|c| !c.is_unassigned()).map(|c| (*c).clone()))
                .collect(),
        );
        self
    }

    pub fn with_scores(mut self, scores: &'a HashMap<SampleId, f64>) -> Self {
        self.scores = Some(scores);
        self
    }

    pub fn pool(&self) -> &IndexedPool {
        self.pool
    }

    pub fn options(&self) -> &QueryOptions {
        &self.options
    }

    /// Clusters the given samples and cuts at the configured threshold.
    pub fn cluster_samples(&self, indices: &[usize]) -> Result<FlatClustering> {
        if indices.is_empty() {
            return Ok(FlatClustering::from_clusters(self.options.threshold, Vec::new()));
        }
        let sub = self.pool.set().subset(indices);
        let d = linkage(&sub, self.options.distance)?;
        Ok(cut_at(&d, sub.ids(), self.options.threshold)?)
    }

    fn unlabeled_samples(&self, state: &PoolState) -> Vec<usize> {
        (0..self.pool.len()).filter(|&i| !state.is_labeled(self.pool.scene_of_index(i))).collect()
    }

    fn class_list(&self, labels: &[Option<ClassName>]) -> Vec<ClassName> {
        match &self.options.classes {
            Some(c) => c.iter().cloned().collect::<BTreeSet<_>>().into_iter().collect(),
            None => labels.iter().flatten().cloned().collect::<BTreeSet<_>>().into_iter().collect(),
        }
    }

    fn per_class(
        &self,
        labels: &[Option<ClassName>],
        samples: &[usize],
    ) -> Result<BTreeMap<ClassName, FlatClustering>> {
        let mut buckets: BTreeMap<ClassName, Vec<usize>> =
            self.class_list(labels).into_iter().map(|c| (c, Vec::new())).collect();
        for &i in samples {
            if let Some(b) = labels[i].as_ref().and_then(|c| buckets.get_mut(c)) {
                b.push(i);
            }
        }
        buckets.into_iter().map(|(c, ix)| Ok((c, self.cluster_samples(&ix)?))).collect()
    }

    /// Flat clustering of the unlabeled pool used by `owe`.
    pub fn owe_clustering(&self, state: &PoolState) -> Result<FlatClustering> {
        if self.options.recluster {
            return self.cluster_samples(&self.unlabeled_samples(state));
        }
        let full = match self.frozen_owe.get() {
            Some(f) => f,
            None => {
                let all: Vec<usize> = (0..self.pool.len()).collect();
                let f = self.cluster_samples(&all)?;
                self.frozen_owe.get_or_init(|| f)
            }
        };
        Ok(full.restrict(|id| !state.is_labeled(self.pool.scene_of(id.as_str()).unwrap())))
    }

    /// Per-class flat clusterings of the unlabeled pool used by `cwm`.
    pub fn cwm_clusterings(&self, state: &PoolState) -> Result<BTreeMap<ClassName, FlatClustering>> {
        let labels = self
            .sample_class
            .as_deref()
            .ok_or_else(|| Error::Config("cwm needs class assignments (zero-shot output or true classes)".into()))?;
        if self.options.recluster {
            return self.per_class(labels, &self.unlabeled_samples(state));
        }
        let full = match self.frozen_cwm.get() {
            Some(f) => f,
            None => {
                let all: Vec<usize> = (0..self.pool.len()).collect();
                let f = self.per_class(labels, &all)?;
                self.frozen_cwm.get_or_init(|| f)
            }
        };
        Ok(full
            .iter()
            .map(|(c, f)| (c.clone(), f.restrict(|id| !state.is_labeled(self.pool.scene_of(id.as_str()).unwrap()))))
            .collect())
    }

    /// Runs one selection. An exhausted pool yields an empty report with
    /// `exhausted` set.
    pub fn select(&self, state: &PoolState, strategy: Strategy, budget: usize, seed: u64) -> Result<SelectionReport> {
        if budget == 0 {
            return Err(SampleError::BudgetNonPositive.into());
        }
        if self.pool.scenes().iter().all(|s| state.is_labeled(s)) {
            return Ok(SelectionReport {
                strategy,
                seed,
                budget,
                selections: Vec::new(),
                exhausted: true,
                quota: None,
            });
        }
        let report = match strategy {
            Strategy::Random => select_random(self.pool, state, budget, seed)?,
            Strategy::Owe => select_owe(&self.owe_clustering(state)?, self.pool, state, budget, seed)?,
            Strategy::Cwm => select_cwm(&self.cwm_clusterings(state)?, self.pool, state, budget, seed)?,
            Strategy::External => {
                let scores = self.scores.ok_or_else(|| Error::Config("external strategy needs a score file".into()))?;
                select_external_score(self.pool, state, scores, budget)?
            }
        };
        Ok(report)
    }
}
