//! Scene selection strategies.
//!
//! The tiered policy behind [`select_owe`] and [`select_cwm`] visits flat
//! clusters in ascending size: every singleton first, then pairs, and so on.
//! Within a tier the cluster order is a seeded shuffle and each visit draws one
//! random remaining sample, so a larger cluster gives up at most one scene per
//! pass. A scene is consumed the first time any of its samples is drawn.

mod baseline;
mod tiered;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::embedding_store::{ClassName, SampleId, SceneId};

pub use baseline::{read_scores_jsonl, select_external_score, select_random};
pub use tiered::{select_cwm, select_owe};

#[derive(Debug, thiserror::Error)]
pub enum SampleError {
    #[error("budget must be at least one scene")]
    BudgetNonPositive,
    #[error("the clustering contains no samples")]
    EmptyPool,
    #[error("no classes to mine")]
    NoClasses,
    #[error("sample {0} has no score")]
    MissingScore(SampleId),
    #[error("sample {0} has a non-finite score")]
    NonFiniteScore(SampleId),
    #[error("sample {0} is not in the pool")]
    UnknownSample(SampleId),
    #[error("invalid score file: {0}")]
    Parse(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    Random,
    Owe,
    Cwm,
    External,
}

impl Strategy {
    pub const ALL: [Strategy; 4] = [Strategy::Random, Strategy::Owe, Strategy::Cwm, Strategy::External];

    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::Random => "random",
            Strategy::Owe => "owe",
            Strategy::Cwm => "cwm",
            Strategy::External => "external",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Strategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Strategy::ALL
            .into_iter()
            .find(|x| x.as_str() == s)
            .ok_or_else(|| format!("unknown strategy {s:?} (expected random, owe, cwm or external)"))
    }
}

/// Labeled / unlabeled split of the scene pool.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PoolState {
    pub all_scenes: BTreeSet<SceneId>,
    pub labeled: BTreeSet<SceneId>,
    pub round: u32,
}

impl PoolState {
    pub fn new(all_scenes: BTreeSet<SceneId>) -> Self {
        Self { all_scenes, labeled: BTreeSet::new(), round: 0 }
    }

    pub fn is_labeled(&self, scene: &SceneId) -> bool {
        self.labeled.contains(scene)
    }

    pub fn unlabeled(&self) -> impl Iterator<Item = &SceneId> + '_ {
        self.all_scenes.difference(&self.labeled)
    }

    pub fn unlabeled_count(&self) -> usize {
        self.all_scenes.len() - self.labeled.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub scene: SceneId,
    pub via_sample: Option<SampleId>,
    /// Size of the cluster the scene was drawn from.
    pub tier: Option<usize>,
    pub class: Option<ClassName>,
}

/// Per-class targets for closed-world mining, before redistribution.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuotaPlan {
    pub targets: BTreeMap<ClassName, usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionReport {
    pub strategy: Strategy,
    pub seed: u64,
    pub budget: usize,
    pub selections: Vec<Selection>,
    /// Set when fewer than `budget` scenes were available.
    pub exhausted: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quota: Option<QuotaPlan>,
}

impl SelectionReport {
    pub fn scenes(&self) -> impl Iterator<Item = &SceneId> + '_ {
        self.selections.iter().map(|s| &s.scene)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialises")
    }
}
