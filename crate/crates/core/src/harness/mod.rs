//! Synthetic worlds, multi-trial experiments and strategy comparison.

mod compare;
mod experiment;
mod reference;
mod synthetic;

pub use compare::{compare_strategies, ComparisonRow, ComparisonTable};
pub use experiment::{
    counts_from_ledger, random_expectation, run_experiment, ExperimentConfig, MeanStd, MetricsReport, RoundMetrics,
    RoundSummary, TrialMetrics, World,
};
pub use reference::{ReferenceRow, ReferenceTable, Score};
pub use synthetic::{
    generate_synthetic, largest_remainder, mean_within_class_distance, SyntheticConfig, SyntheticWorld, DEFAULT_CLASSES,
};

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("invalid class proportions: {0}")]
    InvalidProportions(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("zero-shot class mining needs label embeddings")]
    MissingLabels,
    #[error("reports are not comparable: {0}")]
    MismatchedConfigs(String),
    #[error("{0}")]
    Io(#[from] std::io::Error),
}
