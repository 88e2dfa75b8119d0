use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::clustering::{DistanceSpec, DEFAULT_THRESHOLD};
use crate::embedding_store::{join_manifest, ClassName, EmbeddingSet, IndexedPool, Manifest, SampleId};
use crate::pool_manager::{advance_round, init_pool, Ledger};
use crate::query::{QueryEngine, QueryOptions};
use crate::sampler::Strategy;
use crate::seed;
use crate::zeroshot::{assign_classes, LabelEmbeddingSet};
use crate::Result;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub rounds: u32,
    /// Share of the total scene pool acquired per round.
    pub budget_fraction: f64,
    pub strategy: Strategy,
    pub seed: u64,
    pub trials: usize,
    pub threshold: f64,
    pub recluster: bool,
    /// Classes mined by `cwm`; every class present when unset.
    pub classes: Option<Vec<ClassName>>,
    /// `cwm` reads classes from the manifest instead of running zero-shot.
    pub use_true_classes: bool,
    pub min_score: Option<f64>,
    /// Classes whose share of scenes is at most this are reported as rare.
    pub rare_threshold: f64,
    /// Timestamp written into every ledger record.
    pub timestamp: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            rounds: 5,
            budget_fraction: 0.10,
            strategy: Strategy::Owe,
            seed: 0,
            trials: 4,
            threshold: DEFAULT_THRESHOLD,
            recluster: true,
            classes: None,
            use_true_classes: true,
            min_score: None,
            rare_threshold: 0.011,
            timestamp: 0,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: &str| Err(HarnessError::InvalidConfig(m.into()));
        if self.rounds == 0 {
            return bad("rounds must be positive");
        }
        if !(self.budget_fraction > 0.0 && self.budget_fraction <= 1.0) {
            return bad("budget_fraction must lie in (0, 1]");
        }
        if f64::from(self.rounds) * self.budget_fraction > 1.0 + self.budget_fraction + 1e-12 {
            return bad("rounds x budget_fraction exceeds the pool by more than one round");
        }
        if self.trials == 0 {
            return bad("trials must be positive");
        }
        if !(self.threshold >= 0.0) || !self.threshold.is_finite() {
            return bad("threshold must be a non-negative number");
        }
        Ok(())
    }

    pub fn budget_for(&self, total_scenes: usize) -> usize {
        ((self.budget_fraction * total_scenes as f64).round() as usize).max(1)
    }

    fn query_options(&self) -> QueryOptions {
        QueryOptions {
            threshold: self.threshold,
            distance: DistanceSpec::default(),
            recluster: self.recluster,
            classes: self.classes.clone(),
        }
    }

    pub fn trial_seed(&self, trial: usize) -> u64 {
        seed::derive(self.seed, trial as u64)
    }

    pub fn round_seed(trial_seed: u64, round: u32) -> u64 {
        seed::derive(trial_seed, u64::from(round))
    }
}

/// Everything an experiment reads: the joined pool and optional zero-shot
/// labels or external scores.
pub struct World {
    pub pool: IndexedPool,
    pub manifest: Manifest,
    pub labels: Option<LabelEmbeddingSet>,
    pub scores: Option<HashMap<SampleId, f64>>,
}

impl World {
    pub fn new(set: EmbeddingSet, manifest: Manifest) -> Result<Self> {
        let pool = join_manifest(set, &manifest)?;
        Ok(Self { pool, manifest, labels: None, scores: None })
    }

    pub fn from_synthetic(w: super::SyntheticWorld) -> Result<Self> {
        let mut out = Self::new(w.set, w.manifest)?;
        out.labels = Some(w.labels);
        Ok(out)
    }

    /// Scene count per true class.
    pub fn class_totals(&self) -> BTreeMap<ClassName, usize> {
        let mut out = BTreeMap::new();
        for s in self.pool.scenes() {
            if let Some(c) = self.pool.scene_class(s) {
                *out.entry(c.clone()).or_insert(0) += 1;
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundMetrics {
    pub round: u32,
    pub selected: usize,
    pub per_class: BTreeMap<ClassName, usize>,
    pub cumulative: BTreeMap<ClassName, usize>,
    /// Share of classes with at least one labeled scene.
    pub coverage: f64,
    pub rare_cumulative: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialMetrics {
    pub trial: usize,
    pub seed: u64,
    pub rounds: Vec<RoundMetrics>,
    /// First round after which the class has no unlabeled scenes left.
    pub exhaustion_round: BTreeMap<ClassName, Option<u32>>,
    #[serde(skip)]
    pub ledger: Option<Ledger>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

impl MeanStd {
    /// Mean and sample standard deviation; a single value has std 0.
    pub fn of(xs: &[f64]) -> Self {
        let n = xs.len();
        if n == 0 {
            return Self::default();
        }
        let mean = xs.iter().sum::<f64>() / n as f64;
        let std =
            if n < 2 { 0.0 } else { (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt() };
        Self { mean, std }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundSummary {
    pub round: u32,
    pub cumulative: BTreeMap<ClassName, MeanStd>,
    pub coverage: MeanStd,
    pub rare_cumulative: MeanStd,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub strategy: Strategy,
    pub config: ExperimentConfig,
    pub total_scenes: usize,
    pub budget_per_round: usize,
    pub class_totals: BTreeMap<ClassName, usize>,
    pub rare_classes: Vec<ClassName>,
    pub trials: Vec<TrialMetrics>,
    pub summary: Vec<RoundSummary>,
}

fn run_trial(
    config: &ExperimentConfig,
    world: &World,
    engine: &QueryEngine<'_>,
    class_totals: &BTreeMap<ClassName, usize>,
    rare: &[ClassName],
    budget: usize,
    trial: usize,
) -> Result<TrialMetrics> {
    let trial_seed = config.trial_seed(trial);
    let mut state = init_pool(&world.manifest)?;
    let mut ledger = Ledger::new(&world.manifest);
    let mut cumulative: BTreeMap<ClassName, usize> = class_totals.keys().map(|c| (c.clone(), 0)).collect();
    let mut exhaustion: BTreeMap<ClassName, Option<u32>> = class_totals.keys().map(|c| (c.clone(), None)).collect();
    let mut rounds = Vec::with_capacity(config.rounds as usize);

    for round in 1..=config.rounds {
        let report = engine.select(&state, config.strategy, budget, ExperimentConfig::round_seed(trial_seed, round))?;
        (state, ledger) = advance_round(&state, &report, &ledger, config.timestamp)?;

        let mut per_class: BTreeMap<ClassName, usize> = class_totals.keys().map(|c| (c.clone(), 0)).collect();
        for scene in report.scenes() {
            if let Some(c) = world.pool.scene_class(scene) {
                *per_class.get_mut(c).unwrap() += 1;
            }
        }
        for (c, n) in &per_class {
            let cum = cumulative.get_mut(c).unwrap();
            *cum += n;
            let slot = exhaustion.get_mut(c).unwrap();
            if slot.is_none() && *cum == class_totals[c] {
                *slot = Some(round);
            }
        }
        let covered = cumulative.values().filter(|&&n| n > 0).count();
        rounds.push(RoundMetrics {
            round,
            selected: report.selections.len(),
            coverage: if cumulative.is_empty() { 0.0 } else { covered as f64 / cumulative.len() as f64 },
            rare_cumulative: rare.iter().map(|c| cumulative[c]).sum(),
            per_class,
            cumulative: cumulative.clone(),
        });
    }
    Ok(TrialMetrics { trial, seed: trial_seed, rounds, exhaustion_round: exhaustion, ledger: Some(ledger) })
}

fn summarise(trials: &[TrialMetrics], rounds: u32) -> Vec<RoundSummary> {
    (0..rounds as usize)
        .map(|r| {
            let rows: Vec<&RoundMetrics> = trials.iter().map(|t| &t.rounds[r]).collect();
            let classes = rows[0].cumulative.keys();
            RoundSummary {
                round: rows[0].round,
                cumulative: classes
                    .map(|c| {
                        let xs: Vec<f64> = rows.iter().map(|m| m.cumulative[c] as f64).collect();
                        (c.clone(), MeanStd::of(&xs))
                    })
                    .collect(),
                coverage: MeanStd::of(&rows.iter().map(|m| m.coverage).collect::<Vec<_>>()),
                rare_cumulative: MeanStd::of(&rows.iter().map(|m| m.rare_cumulative as f64).collect::<Vec<_>>()),
            }
        })
        .collect()
}

/// Runs `config.trials` independent acquisition runs and aggregates their
/// selection composition. Trial `t` uses seed `derive(config.seed, t)`.
pub fn run_experiment(config: &ExperimentConfig, world: &World) -> Result<MetricsReport> {
    config.validate()?;
    let total_scenes = world.pool.scenes().len();
    let budget = config.budget_for(total_scenes);

    let assignment;
    let mut engine = QueryEngine::new(&world.pool, config.query_options());
    if config.strategy == Strategy::Cwm {
        if config.use_true_classes {
            engine = engine.with_true_classes();
        } else {
            let labels = world.labels.as_ref().ok_or(HarnessError::MissingLabels)?;
            assignment = assign_classes(world.pool.set(), labels, config.min_score)?;
            engine = engine.with_assignment(&assignment);
        }
    }
    if let Some(scores) = &world.scores {
        engine = engine.with_scores(scores);
    }

    let class_totals = world.class_totals();
    let rare: Vec<ClassName> = class_totals
        .iter()
        .filter(|(_, &n)| n as f64 / total_scenes as f64 <= config.rare_threshold + 1e-12)
        .map(|(c, _)| c.clone())
        .collect();

    let one = |t: usize| run_trial(config, world, &engine, &class_totals, &rare, budget, t);
    #[cfg(feature = "parallel")]
    let trials: Vec<TrialMetrics> = {
        use rayon::prelude::*;
        (0..config.trials).into_par_iter().map(one).collect::<Result<_>>()?
    };
    #[cfg(not(feature = "parallel"))]
    let trials: Vec<TrialMetrics> = (0..config.trials).map(one).collect::<Result<_>>()?;

    Ok(MetricsReport {
        strategy: config.strategy,
        config: config.clone(),
        total_scenes,
        budget_per_round: budget,
        summary: summarise(&trials, config.rounds),
        class_totals,
        rare_classes: rare,
        trials,
    })
}

/// Per-class cumulative counts recomputed from a ledger and the pool's true
/// classes, one map per round.
pub fn counts_from_ledger(ledger: &Ledger, pool: &IndexedPool) -> Vec<BTreeMap<ClassName, usize>> {
    let mut running: BTreeMap<ClassName, usize> = BTreeMap::new();
    ledger
        .rounds
        .iter()
        .map(|r| {
            for s in &r.scenes {
                if let Some(c) = pool.scene_class(s) {
                    *running.entry(c.clone()).or_insert(0) += 1;
                }
            }
            running.clone()
        })
        .collect()
}

/// Expected rare-scene count from uniform random selection after `rounds`
/// rounds: rare_total x labeled / total (hypergeometric mean).
pub fn random_expectation(rare_total: usize, total_scenes: usize, budget: usize, rounds: u32) -> f64 {
    let labeled = (budget * rounds as usize).min(total_scenes);
    rare_total as f64 * labeled as f64 / total_scenes as f64
}
