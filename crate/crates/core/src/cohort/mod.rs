//! Cohort data model, ingestion, labeling, exclusions, splitting and
//! subgroup partitioning.

mod csv_io;
mod demographics;
mod encode;
mod record;
mod schema;
mod split;

use thiserror::Error;

pub use csv_io::{ingest_cohort, ingest_cohort_tagged, write_cohort};
pub use demographics::{demographics_table, DemographicsColumn, DemographicsSummary, TABLE1_HEADER};
pub use encode::{select_features, Dataset, Encoding, FeatureEncoder};
pub use record::{derive_label, Cohort, Gender, Insurance, PatientRecord, Race, Value, HYPERCHLOREMIA_THRESHOLD};
pub use schema::{ColumnKind, ColumnSpec, FeatureSchema, FeatureSet, Role, IDENTITY_COLUMNS};
pub use split::{
    apply_exclusions, split_train_test, subgroup_members, subgroup_partition, Axis, ExclusionReport, SplitIndex,
    SubgroupKey, ADULT_AGE,
};

#[derive(Debug, Error)]
pub enum CohortError {
    #[error("csv error: {0}")]
    Csv(String),
    #[error("header mismatch: {0}")]
    HeaderMismatch(String),
    #[error("line {line}: expected {expected} fields, found {found}")]
    MalformedRow { line: usize, expected: usize, found: usize },
    #[error("line {line}: value `{value}` is not a declared category of `{column}`")]
    UnknownCategory { line: usize, column: String, value: String },
    #[error("line {line}: `{value}` is not a valid value for `{column}`")]
    InvalidNumber { line: usize, column: String, value: String },
    #[error("line {line}: required field `{column}` is empty")]
    MissingField { line: usize, column: String },
    #[error("duplicate stay_id {0}")]
    DuplicateStayId(u64),
    #[error("stay {stay_id}: {reason}")]
    InvalidRecord { stay_id: u64, reason: String },
    #[error("stay {stay_id} has no day-two chloride measurement")]
    MissingMeasurement { stay_id: u64 },
    #[error("cohort is empty")]
    EmptyCohort,
    #[error("split ratio {0} is outside (0, 1)")]
    InvalidRatio(f64),
    #[error("unknown feature set `{0}`")]
    UnknownFeatureSet(String),
    #[error("invalid schema: {0}")]
    InvalidSchema(String),
    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),
}
