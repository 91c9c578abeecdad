use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::AuditError;
use crate::cohort::{Axis, FeatureSet, Insurance, SubgroupKey};
use crate::learners::{ModelKind, ModelSpec};
use crate::synth::SynthConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CohortSource {
    /// A cohort CSV, optionally with a TOML schema file (default: the
    /// 34-column ICU schema).
    Csv {
        path: PathBuf,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        schema: Option<PathBuf>,
    },
    /// Generate the cohort in memory.
    Synth(SynthConfig),
}

/// Where subgroup-specific models get their training rows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum TrainingSource {
    /// Subgroup members of the training split; tested on members of the test split.
    #[default]
    TrainSplit,
    /// Subgroup members of the test split, used for both training and
    /// testing. Replicates a literal reading of the original protocol; the
    /// resulting test AUCs are optimistic.
    TestSplit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct Stages {
    pub demographics: bool,
    pub ablation: bool,
    pub subgroup_audit: bool,
    pub subgroup_specific: bool,
}

impl Default for Stages {
    fn default() -> Self {
        Stages { demographics: true, ablation: true, subgroup_audit: true, subgroup_specific: true }
    }
}

impl Stages {
    pub fn none() -> Self {
        Stages { demographics: false, ablation: false, subgroup_audit: false, subgroup_specific: false }
    }

    /// Selects stages by output table name (`table1`, `table2`, `table3`, `figure2`).
    pub fn only(tables: &[&str]) -> Result<Self, AuditError> {
        let mut s = Stages::none();
        for t in tables {
            match *t {
                "table1" => s.demographics = true,
                "table2" => s.ablation = true,
                "table3" => s.subgroup_audit = true,
                "figure2" => s.subgroup_specific = true,
                other => return Err(AuditError::InvalidConfig(format!("unknown table `{other}`"))),
            }
        }
        Ok(s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AuditConfig {
    pub cohort: CohortSource,
    pub apply_exclusions: bool,
    pub split_ratio: f64,
    /// Master seed; split, model, bootstrap and permutation seeds derive from it.
    pub seed: u64,
    pub models: Vec<ModelSpec>,
    pub feature_sets: Vec<FeatureSet>,
    pub axes: Vec<Axis>,
    pub bootstrap_iterations: usize,
    pub permutations: usize,
    /// Subgroups smaller than this (or missing a class) are flagged in the
    /// subgroup table and skipped for subgroup-specific training.
    pub min_subgroup_size: usize,
    /// Never given subgroup-specific models.
    pub excluded_subgroups: Vec<SubgroupKey>,
    pub threshold: f64,
    pub subgroup_training_source: TrainingSource,
    /// Also audit the SDOH-only and labs-only models on every subgroup.
    pub extended_subgroup_table: bool,
    pub stages: Stages,
}

impl Default for AuditConfig {
    fn default() -> Self {
        AuditConfig {
            cohort: CohortSource::Synth(SynthConfig::default()),
            apply_exclusions: true,
            split_ratio: 0.7,
            seed: 42,
            models: ModelKind::ALL.iter().map(|&k| ModelSpec::new(k, 0)).collect(),
            feature_sets: FeatureSet::ALL.to_vec(),
            axes: Axis::ALL.to_vec(),
            bootstrap_iterations: 1000,
            permutations: 1000,
            min_subgroup_size: 50,
            excluded_subgroups: vec![SubgroupKey::Insurance(Insurance::SelfPay)],
            threshold: 0.5,
            subgroup_training_source: TrainingSource::TrainSplit,
            extended_subgroup_table: true,
            stages: Stages::default(),
        }
    }
}

impl AuditConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, AuditError> {
        toml::from_str(text).map_err(|e| AuditError::InvalidConfig(e.to_string()))
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Makes relative cohort paths relative to `base`.
    pub fn resolve_paths(&mut self, base: &Path) {
        if let CohortSource::Csv { path, schema } = &mut self.cohort {
            if path.is_relative() {
                *path = base.join(&*path);
            }
            if let Some(s) = schema {
                if s.is_relative() {
                    *s = base.join(&*s);
                }
            }
        }
    }

    pub fn validate(&self) -> Result<(), AuditError> {
        let bad = |m: String| Err(AuditError::InvalidConfig(m));
        if !(self.split_ratio > 0.0 && self.split_ratio < 1.0) {
            return bad(format!("split_ratio {} must lie in (0, 1)", self.split_ratio));
        }
        if self.models.is_empty() {
            return bad("at least one model is required".into());
        }
        let mut kinds: Vec<ModelKind> = self.models.iter().map(|m| m.kind()).collect();
        kinds.sort();
        kinds.dedup();
        if kinds.len() != self.models.len() {
            return bad("each classifier kind may appear once".into());
        }
        let mut sets = self.feature_sets.clone();
        sets.sort();
        sets.dedup();
        if sets.len() != self.feature_sets.len() || sets.is_empty() {
            return bad("feature_sets must be nonempty and distinct".into());
        }
        let needs_full = self.stages.subgroup_audit || self.stages.subgroup_specific;
        if needs_full && !self.feature_sets.contains(&FeatureSet::Full) {
            return bad("subgroup stages need the full feature set".into());
        }
        if self.bootstrap_iterations == 0 || self.permutations == 0 {
            return bad("bootstrap_iterations and permutations must be positive".into());
        }
        if !(0.0..=1.0).contains(&self.threshold) {
            return bad(format!("threshold {} must lie in [0, 1]", self.threshold));
        }
        if let CohortSource::Synth(s) = &self.cohort {
            s.validate(&crate::cohort::FeatureSchema::default_icu())?;
        }
        Ok(())
    }

    /// Hex SHA-256 of the canonical JSON form of the config.
    pub fn config_hash(&self) -> String {
        let text = serde_json::to_string(self).expect("config serializes");
        hex::encode(Sha256::digest(text.as_bytes()))
    }

    /// The audited subgroups, in canonical order.
    pub fn subgroups(&self) -> Vec<SubgroupKey> {
        SubgroupKey::all().into_iter().filter(|k| self.axes.contains(&k.axis())).collect()
    }
}
