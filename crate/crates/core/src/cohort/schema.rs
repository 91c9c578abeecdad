use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::record::{Gender, Insurance, Race};
use super::CohortError;

/// Identity columns present in every cohort file, in canonical order.
pub const IDENTITY_COLUMNS: [&str; 8] = [
    "stay_id",
    "age",
    "gender",
    "race",
    "insurance",
    "is_first_admission",
    "day1_chloride_max",
    "day2_chloride_max",
];

/// Identity columns that a schema may also list as model features.
const FEATURE_IDENTITY_COLUMNS: [&str; 5] = ["age", "gender", "race", "insurance", "day1_chloride_max"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColumnKind {
    Numeric,
    Binary,
    Categorical,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Demographic,
    Sdoh,
    Comorbidity,
    Chloride,
    Lab,
    Intervention,
    Medication,
    Vital,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnSpec {
    pub name: String,
    pub kind: ColumnKind,
    pub role: Role,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub units: String,
    /// Declared levels for categorical columns; filled automatically for
    /// gender, race and insurance.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub categories: Vec<String>,
}

impl ColumnSpec {
    fn new(name: &str, kind: ColumnKind, role: Role, units: &str) -> Self {
        ColumnSpec { name: name.to_string(), kind, role, units: units.to_string(), categories: Vec::new() }
    }

    pub fn is_identity(&self) -> bool {
        FEATURE_IDENTITY_COLUMNS.contains(&self.name.as_str())
    }
}

/// Column subsets used by the ablation experiments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureSet {
    Full,
    Sdoh,
    Labs,
}

impl FeatureSet {
    pub const ALL: [FeatureSet; 3] = [FeatureSet::Full, FeatureSet::Sdoh, FeatureSet::Labs];

    pub fn name(self) -> &'static str {
        match self {
            FeatureSet::Full => "full",
            FeatureSet::Sdoh => "sdoh",
            FeatureSet::Labs => "labs",
        }
    }
}

impl fmt::Display for FeatureSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FeatureSet {
    type Err = CohortError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "full" => Ok(FeatureSet::Full),
            "sdoh" | "sdoh_only" => Ok(FeatureSet::Sdoh),
            "labs" | "labs_only" => Ok(FeatureSet::Labs),
            _ => Err(CohortError::UnknownFeatureSet(s.to_string())),
        }
    }
}

/// Ordered feature columns of a cohort. Columns with role `sdoh` form the
/// SDOH-only set; every other column belongs to the labs-only set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSchema {
    columns: Vec<ColumnSpec>,
}

#[derive(Serialize, Deserialize)]
struct SchemaFile {
    version: u32,
    columns: Vec<ColumnSpec>,
}

impl FeatureSchema {
    pub fn new(columns: Vec<ColumnSpec>) -> Result<Self, CohortError> {
        let mut columns = columns;
        let mut seen = HashSet::new();
        for col in columns.iter_mut() {
            if !seen.insert(col.name.clone()) {
                return Err(CohortError::InvalidSchema(format!("duplicate column `{}`", col.name)));
            }
            if IDENTITY_COLUMNS.contains(&col.name.as_str()) && !col.is_identity() {
                return Err(CohortError::InvalidSchema(format!(
                    "identity column `{}` cannot be used as a feature",
                    col.name
                )));
            }
            let fixed: Option<Vec<String>> = match col.name.as_str() {
                "gender" => Some(Gender::ALL.iter().map(|g| g.as_str().to_string()).collect()),
                "race" => Some(Race::ALL.iter().map(|r| r.as_str().to_string()).collect()),
                "insurance" => Some(Insurance::ALL.iter().map(|i| i.as_str().to_string()).collect()),
                _ => None,
            };
            let expected_kind = match col.name.as_str() {
                "age" | "day1_chloride_max" => Some(ColumnKind::Numeric),
                "gender" | "race" | "insurance" => Some(ColumnKind::Categorical),
                _ => None,
            };
            if let Some(kind) = expected_kind {
                if col.kind != kind {
                    return Err(CohortError::InvalidSchema(format!(
                        "column `{}` must be {:?}",
                        col.name, kind
                    )));
                }
            }
            if let Some(levels) = fixed {
                if !col.categories.is_empty() && col.categories != levels {
                    return Err(CohortError::InvalidSchema(format!(
                        "column `{}` has fixed categories {:?}",
                        col.name, levels
                    )));
                }
                col.categories = levels;
            }
            match col.kind {
                ColumnKind::Categorical => {
                    if col.categories.is_empty() {
                        return Err(CohortError::InvalidSchema(format!(
                            "categorical column `{}` declares no categories",
                            col.name
                        )));
                    }
                    let distinct: HashSet<_> = col.categories.iter().collect();
                    if distinct.len() != col.categories.len() {
                        return Err(CohortError::InvalidSchema(format!(
                            "categorical column `{}` repeats a category",
                            col.name
                        )));
                    }
                }
                _ if !col.categories.is_empty() => {
                    return Err(CohortError::InvalidSchema(format!(
                        "non-categorical column `{}` declares categories",
                        col.name
                    )));
                }
                _ => {}
            }
        }
        Ok(FeatureSchema { columns })
    }

    /// The shipped 34-column schema: 4 SDOH columns and 30 clinical ones.
    pub fn default_icu() -> Self {
        use ColumnKind::{Binary as B, Categorical as C, Numeric as N};
        use Role::*;
        let cols = vec![
            ColumnSpec::new("age", N, Sdoh, "years"),
            ColumnSpec::new("gender", C, Sdoh, ""),
            ColumnSpec::new("race", C, Sdoh, ""),
            ColumnSpec::new("insurance", C, Sdoh, ""),
            ColumnSpec::new("weight_kg", N, Demographic, "kg"),
            ColumnSpec::new("chf", B, Comorbidity, ""),
            ColumnSpec::new("renal_failure", B, Comorbidity, ""),
            ColumnSpec::new("hypertension", B, Comorbidity, ""),
            ColumnSpec::new("diabetes", B, Comorbidity, ""),
            ColumnSpec::new("liver_disease", B, Comorbidity, ""),
            ColumnSpec::new("neuro_disorder", B, Comorbidity, ""),
            ColumnSpec::new("day1_chloride_max", N, Chloride, "mEq/L"),
            ColumnSpec::new("net_fluid_balance", N, Chloride, "mL"),
            ColumnSpec::new("total_chloride_load", N, Chloride, "mEq"),
            ColumnSpec::new("max_chloride_input", N, Chloride, "mEq"),
            ColumnSpec::new("sodium_max", N, Lab, "mEq/L"),
            ColumnSpec::new("potassium_max", N, Lab, "mEq/L"),
            ColumnSpec::new("bicarbonate_min", N, Lab, "mEq/L"),
            ColumnSpec::new("bun_max", N, Lab, "mg/dL"),
            ColumnSpec::new("creatinine_max", N, Lab, "mg/dL"),
            ColumnSpec::new("glucose_max", N, Lab, "mg/dL"),
            ColumnSpec::new("hemoglobin_min", N, Lab, "g/dL"),
            ColumnSpec::new("wbc_max", N, Lab, "K/uL"),
            ColumnSpec::new("lactate_max", N, Lab, "mmol/L"),
            ColumnSpec::new("anion_gap_max", N, Lab, "mEq/L"),
            ColumnSpec::new("mechanical_ventilation", B, Intervention, ""),
            ColumnSpec::new("dialysis", B, Intervention, ""),
            ColumnSpec::new("vasopressors", B, Intervention, ""),
            ColumnSpec::new("diuretics", B, Medication, ""),
            ColumnSpec::new("sodium_bicarbonate", B, Medication, ""),
            ColumnSpec::new("heart_rate_max", N, Vital, "bpm"),
            ColumnSpec::new("sbp_min", N, Vital, "mmHg"),
            ColumnSpec::new("temperature_max", N, Vital, "degC"),
            ColumnSpec::new("gcs_min", N, Vital, "points"),
        ];
        FeatureSchema::new(cols).expect("default schema is valid")
    }

    pub fn from_toml_str(text: &str) -> Result<Self, CohortError> {
        let file: SchemaFile =
            toml::from_str(text).map_err(|e| CohortError::InvalidSchema(e.to_string()))?;
        if file.version != 1 {
            return Err(CohortError::InvalidSchema(format!("unsupported schema version {}", file.version)));
        }
        FeatureSchema::new(file.columns)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(&SchemaFile { version: 1, columns: self.columns.clone() })
            .expect("schema serializes")
    }

    pub fn columns(&self) -> &[ColumnSpec] {
        &self.columns
    }

    pub fn len(&self) -> usize {
        self.columns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.columns.is_empty()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }

    /// Columns stored in a record's own feature vector (not identity fields).
    pub fn extra_columns(&self) -> impl Iterator<Item = (usize, &ColumnSpec)> {
        self.columns.iter().enumerate().filter(|(_, c)| !c.is_identity())
    }

    /// Position of a column inside a record's feature vector.
    pub(crate) fn extra_slot(&self, column: usize) -> Option<usize> {
        if self.columns[column].is_identity() {
            return None;
        }
        Some(self.columns[..column].iter().filter(|c| !c.is_identity()).count())
    }

    /// Schema column indices in a feature set, in schema order.
    pub fn feature_set_columns(&self, set: FeatureSet) -> Vec<usize> {
        self.columns
            .iter()
            .enumerate()
            .filter(|(_, c)| match set {
                FeatureSet::Full => true,
                FeatureSet::Sdoh => c.role == Role::Sdoh,
                FeatureSet::Labs => c.role != Role::Sdoh,
            })
            .map(|(i, _)| i)
            .collect()
    }

    /// Header of the cohort CSV: identity columns, then extra feature columns.
    pub fn csv_header(&self) -> Vec<String> {
        IDENTITY_COLUMNS
            .iter()
            .map(|s| s.to_string())
            .chain(self.extra_columns().map(|(_, c)| c.name.clone()))
            .collect()
    }
}

impl Default for FeatureSchema {
    fn default() -> Self {
        FeatureSchema::default_icu()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_schema_counts() {
        let s = FeatureSchema::default_icu();
        assert_eq!(s.len(), 34);
        assert_eq!(s.feature_set_columns(FeatureSet::Sdoh).len(), 4);
        assert_eq!(s.feature_set_columns(FeatureSet::Labs).len(), 30);
    }

    #[test]
    fn sdoh_and_labs_partition_full() {
        let s = FeatureSchema::default_icu();
        let mut union = s.feature_set_columns(FeatureSet::Sdoh);
        let labs = s.feature_set_columns(FeatureSet::Labs);
        assert!(labs.iter().all(|c| !union.contains(c)));
        union.extend(labs);
        union.sort_unstable();
        assert_eq!(union, s.feature_set_columns(FeatureSet::Full));
    }

    #[test]
    fn rejects_duplicates_and_leaky_columns() {
        let dup = vec![
            ColumnSpec::new("a", ColumnKind::Numeric, Role::Lab, ""),
            ColumnSpec::new("a", ColumnKind::Numeric, Role::Lab, ""),
        ];
        assert!(matches!(FeatureSchema::new(dup), Err(CohortError::InvalidSchema(_))));
        let leak = vec![ColumnSpec::new("day2_chloride_max", ColumnKind::Numeric, Role::Chloride, "")];
        assert!(matches!(FeatureSchema::new(leak), Err(CohortError::InvalidSchema(_))));
    }

    #[test]
    fn toml_round_trip() {
        let s = FeatureSchema::default_icu();
        let text = s.to_toml_string();
        assert_eq!(FeatureSchema::from_toml_str(&text).unwrap(), s);
    }

    #[test]
    fn unknown_feature_set_name() {
        assert!(matches!("vitals".parse::<FeatureSet>(), Err(CohortError::UnknownFeatureSet(_))));
        assert_eq!("SDOH".parse::<FeatureSet>().unwrap(), FeatureSet::Sdoh);
    }
}
