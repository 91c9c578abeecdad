use std::fs::File;
use std::io::BufReader;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{AuditConfig, AuditError, CohortSource, TrainingSource};
use crate::cohort::{
    apply_exclusions, ingest_cohort, split_train_test, subgroup_members, write_cohort, Cohort, ExclusionReport,
    FeatureEncoder, FeatureSchema, FeatureSet, SplitIndex, SubgroupKey,
};
use crate::learners::{train_on_cohort, LearnerError, ModelKind, ModelSpec, TrainedModel};
use crate::metrics::{
    bootstrap_auc, metrics_record, permutation_test_paired_models, permutation_test_subgroup, roc_auc,
    MetricsError, PermutationMethod,
};
use crate::rng::{derive_seed, Stream};
use crate::synth::generate_cohort;

/// The cohort after exclusions, with its train/test split.
#[derive(Debug, Clone)]
pub struct PreparedCohort {
    pub cohort: Cohort,
    pub split: SplitIndex,
    pub exclusions: Option<ExclusionReport>,
    /// Hex SHA-256 of the cohort in canonical CSV form (before exclusions).
    pub cohort_hash: String,
}

pub fn prepare_cohort(config: &AuditConfig) -> Result<PreparedCohort, AuditError> {
    let raw = match &config.cohort {
        CohortSource::Synth(s) => generate_cohort(s)?,
        CohortSource::Csv { path, schema } => {
            let schema = match schema {
                Some(p) => FeatureSchema::from_toml_str(&std::fs::read_to_string(p)?)?,
                None => FeatureSchema::default_icu(),
            };
            let file = File::open(path)
                .map_err(|e| AuditError::InvalidConfig(format!("cannot open cohort {}: {e}", path.display())))?;
            ingest_cohort(BufReader::new(file), schema)?
        }
    };
    let mut bytes = Vec::new();
    write_cohort(&raw, &mut bytes)?;
    let cohort_hash = hex::encode(Sha256::digest(&bytes));
    let (cohort, exclusions) = if config.apply_exclusions {
        let (c, r) = apply_exclusions(&raw);
        (c, Some(r))
    } else {
        (raw, None)
    };
    let split = split_train_test(&cohort, config.split_ratio, config.seed)?;
    Ok(PreparedCohort { cohort, split, exclusions, cohort_hash })
}

/// A trained model with its scores on the whole test split.
#[derive(Debug, Clone)]
pub struct FittedModel {
    pub classifier: ModelKind,
    pub feature_set: FeatureSet,
    pub model: TrainedModel,
    pub test_scores: Vec<f64>,
}

fn model_spec(config: &AuditConfig, classifier: usize) -> ModelSpec {
    let mut spec = config.models[classifier].clone();
    spec.seed = derive_seed(config.seed, Stream::Model, classifier as u64);
    spec
}

fn fit(
    config: &AuditConfig,
    cohort: &Cohort,
    classifier: usize,
    set: FeatureSet,
    train: &[usize],
) -> Result<TrainedModel, LearnerError> {
    let spec = model_spec(config, classifier);
    let encoder = FeatureEncoder::fit(cohort, train, set, spec.kind().encoding());
    train_on_cohort(&spec, cohort, train, encoder)
}

/// Trains every classifier on every requested feature set.
pub fn train_models(
    config: &AuditConfig,
    prep: &PreparedCohort,
    sets: &[FeatureSet],
) -> Result<Vec<FittedModel>, AuditError> {
    let cells: Vec<(usize, FeatureSet)> =
        (0..config.models.len()).flat_map(|m| sets.iter().map(move |&s| (m, s))).collect();
    cells
        .par_iter()
        .map(|&(m, set)| {
            let model = fit(config, &prep.cohort, m, set, &prep.split.train)?;
            let test_scores = model.predict_cohort(&prep.cohort, &prep.split.test)?;
            log::info!("trained {} on {set} features", model.kind());
            Ok(FittedModel { classifier: model.kind(), feature_set: set, model, test_scores })
        })
        .collect()
}

fn cell_seed(config: &AuditConfig, stream: Stream, parts: &[u64]) -> u64 {
    parts.iter().fold(derive_seed(config.seed, stream, 0), |acc, &p| derive_seed(acc, stream, p + 1))
}

fn set_index(set: FeatureSet) -> u64 {
    FeatureSet::ALL.iter().position(|&s| s == set).unwrap() as u64
}

fn kind_index(kind: ModelKind) -> u64 {
    ModelKind::ALL.iter().position(|&k| k == kind).unwrap() as u64
}

fn subgroup_index(key: SubgroupKey) -> u64 {
    SubgroupKey::all().iter().position(|&k| k == key).unwrap() as u64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub classifier: ModelKind,
    pub feature_set: FeatureSet,
    pub n_features: usize,
    pub n_train: usize,
    pub n_train_used: usize,
    pub train_auc: Option<f64>,
    pub test_auc: f64,
    pub bootstrap_mean_auc: f64,
    pub bootstrap_std_auc: f64,
    pub bootstrap_iterations: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub p_full_vs_sdoh: Option<f64>,
    pub p_full_vs_labs: Option<f64>,
    pub p_method: Option<String>,
    pub permutations: Option<usize>,
}

/// Ablation table: one row per classifier and feature set, with paired
/// permutation p-values of the full-feature model against the SDOH-only
/// and labs-only models on the full-feature rows.
pub fn run_feature_ablation(
    config: &AuditConfig,
    prep: &PreparedCohort,
    models: &[FittedModel],
) -> Result<Vec<AblationRow>, AuditError> {
    let y = prep.cohort.labels(&prep.split.test)?;
    models
        .par_iter()
        .map(|fm| {
            let cell = [kind_index(fm.classifier), set_index(fm.feature_set)];
            let boot = bootstrap_auc(
                &fm.test_scores,
                &y,
                config.bootstrap_iterations,
                cell_seed(config, Stream::Bootstrap, &cell),
                false,
            )?;
            let m = metrics_record(&fm.test_scores, &y, config.threshold)?;
            let mut row = AblationRow {
                classifier: fm.classifier,
                feature_set: fm.feature_set,
                n_features: fm.model.n_features,
                n_train: fm.model.n_train,
                n_train_used: fm.model.n_used,
                train_auc: fm.model.train_auc,
                test_auc: m.auc,
                bootstrap_mean_auc: boot.mean_auc,
                bootstrap_std_auc: boot.std_auc,
                bootstrap_iterations: boot.retained,
                precision: m.precision,
                recall: m.recall,
                f1: m.f1,
                p_full_vs_sdoh: None,
                p_full_vs_labs: None,
                p_method: None,
                permutations: None,
            };
            if fm.feature_set == FeatureSet::Full {
                let partner = |set| models.iter().find(|o| o.classifier == fm.classifier && o.feature_set == set);
                for set in [FeatureSet::Sdoh, FeatureSet::Labs] {
                    if let Some(other) = partner(set) {
                        let seed = cell_seed(config, Stream::Permutation, &[cell[0], set_index(set)]);
                        let r = permutation_test_paired_models(
                            &fm.test_scores,
                            &other.test_scores,
                            &y,
                            config.permutations,
                            seed,
                        )?;
                        match set {
                            FeatureSet::Sdoh => row.p_full_vs_sdoh = Some(r.p_value),
                            _ => row.p_full_vs_labs = Some(r.p_value),
                        }
                        row.p_method = Some(r.method.tag().to_string());
                        row.permutations = Some(r.permutations);
                    }
                }
            }
            Ok(row)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CellStatus {
    Ok,
    /// The subgroup's test slice is empty or holds one class.
    Degenerate,
    /// Size or class requirements not met; nothing trained.
    Skipped,
    /// Training failed; see the note.
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubgroupRow {
    pub classifier: ModelKind,
    pub feature_set: FeatureSet,
    pub subgroup: SubgroupKey,
    pub n_test: usize,
    pub n_positive: usize,
    pub point_auc: Option<f64>,
    pub bootstrap_mean_auc: Option<f64>,
    pub bootstrap_std_auc: Option<f64>,
    pub full_test_auc: f64,
    pub gap: Option<f64>,
    pub p_value: Option<f64>,
    pub p_method: String,
    pub permutations: Option<usize>,
    pub size_warning: bool,
    pub status: CellStatus,
    /// Full-feature rows; the others only appear in the extended table.
    pub reported: bool,
}

/// Subgroup audit: each model's bootstrap AUC on every subgroup's test
/// slice and a subgroup-membership permutation test against its AUC on
/// the whole test split.
pub fn run_subgroup_audit(
    config: &AuditConfig,
    prep: &PreparedCohort,
    models: &[FittedModel],
) -> Result<Vec<SubgroupRow>, AuditError> {
    let test = &prep.split.test;
    let y = prep.cohort.labels(test)?;
    let subgroups = config.subgroups();
    let cells: Vec<(&FittedModel, SubgroupKey)> =
        models.iter().flat_map(|m| subgroups.iter().map(move |&k| (m, k))).collect();
    cells
        .par_iter()
        .map(|&(fm, key)| {
            let mask: Vec<bool> = test.iter().map(|&i| key.contains(&prep.cohort.records()[i])).collect();
            let scores: Vec<f64> = fm.test_scores.iter().zip(&mask).filter(|p| *p.1).map(|p| *p.0).collect();
            let labels: Vec<bool> = y.iter().zip(&mask).filter(|p| *p.1).map(|p| *p.0).collect();
            let n_positive = labels.iter().filter(|&&l| l).count();
            let full_test_auc = roc_auc(&fm.test_scores, &y)?;
            let degenerate = n_positive == 0 || n_positive == labels.len();
            let mut row = SubgroupRow {
                classifier: fm.classifier,
                feature_set: fm.feature_set,
                subgroup: key,
                n_test: labels.len(),
                n_positive,
                point_auc: None,
                bootstrap_mean_auc: None,
                bootstrap_std_auc: None,
                full_test_auc,
                gap: None,
                p_value: None,
                p_method: PermutationMethod::SubgroupMembership.tag().to_string(),
                permutations: None,
                size_warning: degenerate || labels.len() < config.min_subgroup_size,
                status: if degenerate { CellStatus::Degenerate } else { CellStatus::Ok },
                reported: fm.feature_set == FeatureSet::Full,
            };
            if degenerate {
                return Ok(row);
            }
            let cell = [kind_index(fm.classifier), set_index(fm.feature_set), subgroup_index(key)];
            let boot = bootstrap_auc(&scores, &labels, config.bootstrap_iterations, cell_seed(config, Stream::Bootstrap, &cell), false)?;
            let perm = permutation_test_subgroup(
                &fm.test_scores,
                &y,
                &mask,
                config.permutations,
                cell_seed(config, Stream::Permutation, &cell),
            );
            row.point_auc = Some(roc_auc(&scores, &labels)?);
            row.bootstrap_mean_auc = Some(boot.mean_auc);
            row.bootstrap_std_auc = Some(boot.std_auc);
            match perm {
                Ok(r) => {
                    row.gap = Some(r.gap);
                    row.p_value = Some(r.p_value);
                    row.permutations = Some(r.permutations);
                }
                Err(MetricsError::AllDegenerate) => row.status = CellStatus::Degenerate,
                Err(e) => return Err(e.into()),
            }
            Ok(row)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpecificRow {
    pub classifier: ModelKind,
    pub subgroup: SubgroupKey,
    pub status: CellStatus,
    pub n_train: usize,
    pub n_test: usize,
    pub train_auc: Option<f64>,
    pub test_auc: Option<f64>,
    /// The all-patient full-feature model on the same subgroup test rows.
    pub all_patient_test_auc: Option<f64>,
    pub gap: Option<f64>,
    pub p_value: Option<f64>,
    pub p_method: String,
    pub permutations: Option<usize>,
    pub note: String,
}

fn both_classes(labels: &[bool]) -> bool {
    labels.iter().any(|&l| l) && labels.iter().any(|&l| !l)
}

/// Subgroup-specific retraining: a full-feature model per classifier and
/// non-excluded subgroup, compared with the all-patient model on the
/// subgroup's test rows by a paired permutation test.
pub fn run_subgroup_specific(
    config: &AuditConfig,
    prep: &PreparedCohort,
    full_models: &[FittedModel],
) -> Result<Vec<SpecificRow>, AuditError> {
    let test = &prep.split.test;
    let y_test = prep.cohort.labels(test)?;
    let subgroups: Vec<SubgroupKey> =
        config.subgroups().into_iter().filter(|k| !config.excluded_subgroups.contains(k)).collect();
    let cells: Vec<(usize, SubgroupKey)> =
        (0..config.models.len()).flat_map(|m| subgroups.iter().map(move |&k| (m, k))).collect();
    cells
        .par_iter()
        .map(|&(m, key)| {
            let kind = config.models[m].kind();
            let source = match config.subgroup_training_source {
                TrainingSource::TrainSplit => &prep.split.train,
                TrainingSource::TestSplit => test,
            };
            let train = subgroup_members(&prep.cohort, source, key);
            let positions: Vec<usize> =
                (0..test.len()).filter(|&p| key.contains(&prep.cohort.records()[test[p]])).collect();
            let test_rows: Vec<usize> = positions.iter().map(|&p| test[p]).collect();
            let y_sub: Vec<bool> = positions.iter().map(|&p| y_test[p]).collect();
            let y_train = prep.cohort.labels(&train)?;
            let mut row = SpecificRow {
                classifier: kind,
                subgroup: key,
                status: CellStatus::Skipped,
                n_train: train.len(),
                n_test: test_rows.len(),
                train_auc: None,
                test_auc: None,
                all_patient_test_auc: None,
                gap: None,
                p_value: None,
                p_method: PermutationMethod::PairedModels.tag().to_string(),
                permutations: None,
                note: String::new(),
            };
            if train.len() < config.min_subgroup_size {
                row.note = format!("training subgroup has {} records, minimum {}", train.len(), config.min_subgroup_size);
                return Ok(row);
            }
            if !both_classes(&y_train) || !both_classes(&y_sub) {
                row.note = "training or test subgroup holds a single class".into();
                return Ok(row);
            }
            let model = match fit(config, &prep.cohort, m, FeatureSet::Full, &train) {
                Ok(model) => model,
                Err(e) => {
                    row.status = CellStatus::Failed;
                    row.note = e.to_string();
                    return Ok(row);
                }
            };
            let scores = model.predict_cohort(&prep.cohort, &test_rows)?;
            let all_patient = full_models
                .iter()
                .find(|f| f.classifier == kind && f.feature_set == FeatureSet::Full)
                .ok_or_else(|| AuditError::InvalidConfig(format!("no full-feature {kind} model")))?;
            let baseline: Vec<f64> = positions.iter().map(|&p| all_patient.test_scores[p]).collect();
            let cell = [kind_index(kind), 3, subgroup_index(key)];
            let r = permutation_test_paired_models(
                &baseline,
                &scores,
                &y_sub,
                config.permutations,
                cell_seed(config, Stream::Permutation, &cell),
            )?;
            row.status = CellStatus::Ok;
            row.train_auc = model.train_auc;
            row.test_auc = Some(r.variant_auc);
            row.all_patient_test_auc = Some(r.baseline_auc);
            row.gap = Some(r.gap);
            row.p_value = Some(r.p_value);
            row.permutations = Some(r.permutations);
            if !model.converged {
                row.note = "training loss did not decrease".into();
            }
            Ok(row)
        })
        .collect()
}

/// Trains the model a subgroup-specific cell would use; exposed for tests
/// and the `shap` command.
pub fn train_subgroup_model(
    config: &AuditConfig,
    prep: &PreparedCohort,
    classifier: usize,
    key: SubgroupKey,
) -> Result<TrainedModel, AuditError> {
    let source = match config.subgroup_training_source {
        TrainingSource::TrainSplit => &prep.split.train,
        TrainingSource::TestSplit => &prep.split.test,
    };
    let train = subgroup_members(&prep.cohort, source, key);
    Ok(fit(config, &prep.cohort, classifier, FeatureSet::Full, &train)?)
}
