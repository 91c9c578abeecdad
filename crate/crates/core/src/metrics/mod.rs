//! Rank statistics and resampling inference.

mod auc;
mod bootstrap;
mod permutation;
mod threshold;

use thiserror::Error;

pub use auc::{roc_auc, PairCounts, RankedScores};
pub use bootstrap::{bootstrap_auc, BootstrapSummary};
pub use permutation::{permutation_test_paired_models, permutation_test_subgroup, ComparisonResult, PermutationMethod};
pub use threshold::{metrics_record, precision_recall_f1, MetricsRecord};

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("AUC needs both classes present")]
    SingleClass,
    #[error("subgroup is empty or holds a single class")]
    DegenerateSubgroup,
    #[error("every resample held a single class")]
    AllDegenerate,
    #[error("{scores} scores for {labels} labels")]
    LengthMismatch { scores: usize, labels: usize },
    #[error("scores must be finite")]
    NonFiniteScore,
    #[error("{0}")]
    InvalidArgument(String),
}
