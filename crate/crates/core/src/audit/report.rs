use std::fs;
use std::io::Write as _;
use std::path::Path;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use super::experiments::{
    prepare_cohort, run_feature_ablation, run_subgroup_audit, run_subgroup_specific, train_models, AblationRow,
    FittedModel, SpecificRow, SubgroupRow,
};
use super::{AuditConfig, AuditError};
use crate::cohort::{demographics_table, DemographicsSummary, ExclusionReport, FeatureSet, TABLE1_HEADER};

/// A table that was either produced or deliberately skipped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", content = "rows", rename_all = "snake_case")]
pub enum Section<T> {
    NotRun,
    Done(T),
}

impl<T> Section<T> {
    pub fn done(&self) -> Option<&T> {
        match self {
            Section::Done(t) => Some(t),
            Section::NotRun => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageTiming {
    pub stage: String,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub config_hash: String,
    pub cohort_hash: String,
    pub master_seed: u64,
    pub n_cohort: usize,
    pub n_train: usize,
    pub n_test: usize,
    pub exclusions: Option<ExclusionReport>,
    pub started_unix: u64,
    pub finished_unix: u64,
    pub stages: Vec<StageTiming>,
    /// Files written, relative to the output directory.
    pub outputs: Vec<String>,
    /// Set when a stage failed; `outputs` then lists what was written.
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportBundle {
    pub manifest: RunManifest,
    pub demographics: Section<DemographicsSummary>,
    pub ablation: Section<Vec<AblationRow>>,
    pub subgroup_audit: Section<Vec<SubgroupRow>>,
    pub subgroup_specific: Section<Vec<SpecificRow>>,
}

/// Completed pieces of a run.
#[derive(Debug, Default)]
pub struct Partials {
    pub demographics: Option<DemographicsSummary>,
    pub ablation: Option<Vec<AblationRow>>,
    pub subgroup_audit: Option<Vec<SubgroupRow>>,
    pub subgroup_specific: Option<Vec<SpecificRow>>,
}

fn section<T>(v: Option<T>) -> Section<T> {
    v.map_or(Section::NotRun, Section::Done)
}

pub fn assemble_report(manifest: RunManifest, partials: Partials) -> ReportBundle {
    ReportBundle {
        manifest,
        demographics: section(partials.demographics),
        ablation: section(partials.ablation),
        subgroup_audit: section(partials.subgroup_audit),
        subgroup_specific: section(partials.subgroup_specific),
    }
}

pub struct AuditRun {
    pub bundle: ReportBundle,
    /// Full-feature models trained on the whole training split.
    pub full_models: Vec<FittedModel>,
}

fn unix_now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

/// Runs the stages selected in `config.stages`.
pub fn run_audit(config: &AuditConfig) -> Result<AuditRun, AuditError> {
    config.validate()?;
    let started_unix = unix_now();
    let mut stages = Vec::new();
    let mut timed = |name: &str, t: Instant| stages.push(StageTiming { stage: name.into(), seconds: t.elapsed().as_secs_f64() });

    let t = Instant::now();
    let prep = prepare_cohort(config)?;
    timed("prepare", t);
    let s = config.stages;
    let mut partials = Partials::default();
    if s.demographics {
        let t = Instant::now();
        partials.demographics = Some(demographics_table(&prep.cohort)?);
        timed("demographics", t);
    }

    let mut sets: Vec<FeatureSet> = Vec::new();
    if s.ablation || (s.subgroup_audit && config.extended_subgroup_table) {
        sets = config.feature_sets.clone();
    } else if s.subgroup_audit || s.subgroup_specific {
        sets.push(FeatureSet::Full);
    }
    let t = Instant::now();
    let models = train_models(config, &prep, &sets)?;
    if !sets.is_empty() {
        timed("training", t);
    }
    if s.ablation {
        let t = Instant::now();
        partials.ablation = Some(run_feature_ablation(config, &prep, &models)?);
        timed("ablation", t);
    }
    if s.subgroup_audit {
        let t = Instant::now();
        let audited: Vec<FittedModel> = models
            .iter()
            .filter(|m| config.extended_subgroup_table || m.feature_set == FeatureSet::Full)
            .cloned()
            .collect();
        partials.subgroup_audit = Some(run_subgroup_audit(config, &prep, &audited)?);
        timed("subgroup_audit", t);
    }
    if s.subgroup_specific {
        let t = Instant::now();
        partials.subgroup_specific = Some(run_subgroup_specific(config, &prep, &models)?);
        timed("subgroup_specific", t);
    }

    let manifest = RunManifest {
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        config_hash: config.config_hash(),
        cohort_hash: prep.cohort_hash.clone(),
        master_seed: config.seed,
        n_cohort: prep.cohort.len(),
        n_train: prep.split.train.len(),
        n_test: prep.split.test.len(),
        exclusions: prep.exclusions,
        started_unix,
        finished_unix: unix_now(),
        stages,
        outputs: Vec::new(),
        error: None,
    };
    let full_models = models.into_iter().filter(|m| m.feature_set == FeatureSet::Full).collect();
    Ok(AuditRun { bundle: assemble_report(manifest, partials), full_models })
}

fn csv_bytes<T: Serialize>(rows: &[T]) -> Result<Vec<u8>, AuditError> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    w.into_inner().map_err(|e| AuditError::Io(e.into_error()))
}

/// CSV text of the demographics table.
pub fn table1_csv(summary: &DemographicsSummary) -> Result<Vec<u8>, AuditError> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    let mut header: Vec<String> = vec![TABLE1_HEADER[0].to_string()];
    header.extend(summary.columns.iter().map(|c| c.label.clone()));
    w.write_record(&header)?;
    for row in summary.rows() {
        w.write_record(&row)?;
    }
    w.into_inner().map_err(|e| AuditError::Io(e.into_error()))
}

/// The CSV tables of a bundle as `(file name, bytes)`, in a fixed order.
pub fn table_files(bundle: &ReportBundle) -> Result<Vec<(&'static str, Vec<u8>)>, AuditError> {
    let mut out = Vec::new();
    if let Some(d) = bundle.demographics.done() {
        out.push(("table1.csv", table1_csv(d)?));
    }
    if let Some(rows) = bundle.ablation.done() {
        out.push(("table2.csv", csv_bytes(rows)?));
    }
    if let Some(rows) = bundle.subgroup_audit.done() {
        let reported: Vec<&SubgroupRow> = rows.iter().filter(|r| r.reported).collect();
        out.push(("table3.csv", csv_bytes(&reported)?));
        if rows.len() > reported.len() {
            out.push(("table3_extended.csv", csv_bytes(rows)?));
        }
    }
    if let Some(rows) = bundle.subgroup_specific.done() {
        out.push(("figure2.csv", csv_bytes(rows)?));
    }
    Ok(out)
}

/// Writes a file through a temporary sibling and a rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let tmp = path.with_extension("tmp");
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(tmp, path)
}

/// Writes the tables and `report.json` into `dir`, returning the file names.
pub fn write_outputs(bundle: &ReportBundle, dir: &Path) -> Result<Vec<String>, AuditError> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    for (name, bytes) in table_files(bundle)? {
        write_atomic(&dir.join(name), &bytes)?;
        written.push(name.to_string());
    }
    write_atomic(&dir.join("report.json"), bundle.to_json().as_bytes())?;
    written.push("report.json".into());
    Ok(written)
}

/// Writes `manifest.json` last, after everything it lists.
pub fn write_manifest(manifest: &RunManifest, dir: &Path) -> Result<(), AuditError> {
    let text = serde_json::to_string_pretty(manifest).expect("manifest serializes");
    write_atomic(&dir.join("manifest.json"), text.as_bytes())?;
    Ok(())
}

impl ReportBundle {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("bundle serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, AuditError> {
        serde_json::from_str(text).map_err(|e| AuditError::InvalidConfig(format!("report bundle: {e}")))
    }
}
