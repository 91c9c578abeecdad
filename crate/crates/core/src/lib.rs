//! Subgroup performance-bias auditing for binary clinical classifiers.
//!
//! The crate trains four from-scratch classifiers on a tabular ICU cohort
//! under feature ablations, then measures how their ROC-AUC varies across
//! race, gender and insurance subgroups with bootstrap estimates and
//! permutation tests, and explains them with Shapley values. A seeded
//! synthetic cohort generator makes every experiment runnable without
//! restricted data.

pub mod audit;
pub mod cohort;
pub mod learners;
pub mod linalg;
pub mod metrics;
pub mod plot;
pub mod rng;
pub mod shap;
pub mod synth;

pub use cohort::{Cohort, CohortError, FeatureSchema, FeatureSet, PatientRecord, SubgroupKey};
pub use linalg::Matrix;
