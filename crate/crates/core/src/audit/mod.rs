//! The three audit experiments and their report tables.
//!
//! * feature ablation: every classifier on the full, SDOH-only and
//!   labs-only feature sets (`table2.csv`);
//! * subgroup audit: full-feature models on each subgroup's test slice
//!   (`table3.csv`, all feature sets in `table3_extended.csv`);
//! * subgroup-specific retraining (`figure2.csv`).
//!
//! Every random draw derives from the master seed and the cell it belongs
//! to, so tables are byte-identical across runs and worker counts.

mod config;
mod experiments;
mod report;

use thiserror::Error;

pub use config::{AuditConfig, CohortSource, Stages, TrainingSource};
pub use experiments::{
    prepare_cohort, run_feature_ablation, run_subgroup_audit, run_subgroup_specific, train_models,
    train_subgroup_model, AblationRow, CellStatus, FittedModel, PreparedCohort, SpecificRow, SubgroupRow,
};
pub use report::{
    assemble_report, run_audit, table1_csv, table_files, write_atomic, write_manifest, write_outputs, AuditRun,
    Partials, ReportBundle, RunManifest, Section, StageTiming,
};

#[derive(Debug, Error)]
pub enum AuditError {
    #[error("invalid audit config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Cohort(#[from] crate::cohort::CohortError),
    #[error(transparent)]
    Synth(#[from] crate::synth::SynthError),
    #[error(transparent)]
    Learner(#[from] crate::learners::LearnerError),
    #[error(transparent)]
    Metrics(#[from] crate::metrics::MetricsError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}
