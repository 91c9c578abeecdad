use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::schema::{ColumnKind, FeatureSchema};
use super::CohortError;

/// Serum chloride level (mEq/L) at or above which a stay counts as hyperchloremic.
pub const HYPERCHLOREMIA_THRESHOLD: f64 = 110.0;

macro_rules! category_enum {
    ($(#[$meta:meta])* $name:ident { $($variant:ident => $text:literal),+ $(,)? }) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
        pub enum $name {
            $($variant),+
        }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn as_str(self) -> &'static str {
                match self {
                    $($name::$variant => $text),+
                }
            }

            pub fn index(self) -> usize {
                Self::ALL.iter().position(|&v| v == self).unwrap()
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }

        impl FromStr for $name {
            type Err = ();

            fn from_str(s: &str) -> Result<Self, ()> {
                match s {
                    $($text => Ok($name::$variant),)+
                    _ => Err(()),
                }
            }
        }
    };
}

category_enum!(Gender { Female => "Female", Male => "Male" });

category_enum!(
    /// Self-reported race. `Unknown` marks missing reports and never forms
    /// an audit subgroup.
    Race {
        Black => "Black",
        Asian => "Asian",
        Hispanic => "Hispanic",
        White => "White",
        Unknown => "Unknown",
    }
);

category_enum!(Insurance {
    Government => "Government",
    Medicare => "Medicare",
    Medicaid => "Medicaid",
    Private => "Private",
    SelfPay => "SelfPay",
});

/// A stored feature value: a number, or the level index of a categorical column.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Value {
    Number(f64),
    Level(u32),
}

/// One ICU stay.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatientRecord {
    pub stay_id: u64,
    pub age: f64,
    pub gender: Gender,
    pub race: Race,
    pub insurance: Insurance,
    pub is_first_admission: bool,
    pub day1_chloride_max: Option<f64>,
    pub day2_chloride_max: Option<f64>,
    /// Values of the schema's non-identity columns, in schema order.
    pub features: Vec<Option<Value>>,
    pub label: Option<bool>,
}

/// Hyperchloremia on day two: maximum serum chloride of 110 mEq/L or more.
pub fn derive_label(record: &PatientRecord) -> Result<bool, CohortError> {
    record
        .day2_chloride_max
        .map(|v| v >= HYPERCHLOREMIA_THRESHOLD)
        .ok_or(CohortError::MissingMeasurement { stay_id: record.stay_id })
}

impl PatientRecord {
    /// Value of schema column `column`, resolving identity columns to the
    /// record's own fields.
    pub fn value(&self, schema: &FeatureSchema, column: usize) -> Option<Value> {
        let spec = &schema.columns()[column];
        match spec.name.as_str() {
            "age" => Some(Value::Number(self.age)),
            "gender" => Some(Value::Level(self.gender.index() as u32)),
            "race" => Some(Value::Level(self.race.index() as u32)),
            "insurance" => Some(Value::Level(self.insurance.index() as u32)),
            "day1_chloride_max" => self.day1_chloride_max.map(Value::Number),
            _ => {
                let slot = schema.extra_slot(column).expect("non-identity column has a slot");
                self.features.get(slot).copied().flatten()
            }
        }
    }

    /// Looks a feature up by column name.
    pub fn feature(&self, schema: &FeatureSchema, name: &str) -> Option<Value> {
        schema.index_of(name).and_then(|c| self.value(schema, c))
    }

    /// The stored label, or the one implied by the day-two measurement.
    pub fn resolved_label(&self) -> Result<bool, CohortError> {
        match self.label {
            Some(l) => Ok(l),
            None => derive_label(self),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cohort {
    schema: FeatureSchema,
    records: Vec<PatientRecord>,
    pub provenance: String,
}

impl Cohort {
    /// Validates that stay ids are unique and feature vectors fit the schema.
    pub fn new(
        schema: FeatureSchema,
        records: Vec<PatientRecord>,
        provenance: impl Into<String>,
    ) -> Result<Self, CohortError> {
        let n_extra = schema.extra_columns().count();
        let mut ids = HashSet::with_capacity(records.len());
        for r in &records {
            if !ids.insert(r.stay_id) {
                return Err(CohortError::DuplicateStayId(r.stay_id));
            }
            if r.features.len() != n_extra {
                return Err(CohortError::InvalidRecord {
                    stay_id: r.stay_id,
                    reason: format!("{} feature values for {} columns", r.features.len(), n_extra),
                });
            }
            if !(r.age >= 0.0) {
                return Err(CohortError::InvalidRecord { stay_id: r.stay_id, reason: "negative age".into() });
            }
            for ((_, col), v) in schema.extra_columns().zip(&r.features) {
                let ok = match (col.kind, v) {
                    (_, None) => true,
                    (ColumnKind::Categorical, Some(Value::Level(l))) => (*l as usize) < col.categories.len(),
                    (ColumnKind::Numeric, Some(Value::Number(x))) => x.is_finite(),
                    (ColumnKind::Binary, Some(Value::Number(x))) => *x == 0.0 || *x == 1.0,
                    _ => false,
                };
                if !ok {
                    return Err(CohortError::InvalidRecord {
                        stay_id: r.stay_id,
                        reason: format!("bad value for column `{}`", col.name),
                    });
                }
            }
            if let (Some(l), Some(_)) = (r.label, r.day2_chloride_max) {
                if l != derive_label(r)? {
                    return Err(CohortError::InvalidRecord {
                        stay_id: r.stay_id,
                        reason: "label disagrees with day-two chloride".into(),
                    });
                }
            }
        }
        Ok(Cohort { schema, records, provenance: provenance.into() })
    }

    pub fn schema(&self) -> &FeatureSchema {
        &self.schema
    }

    pub fn records(&self) -> &[PatientRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Labels of the given records, failing on any record without a day-two value.
    pub fn labels(&self, indices: &[usize]) -> Result<Vec<bool>, CohortError> {
        indices.iter().map(|&i| self.records[i].resolved_label()).collect()
    }

    /// A cohort restricted to the given records, in the given order.
    pub fn subset(&self, indices: &[usize]) -> Cohort {
        Cohort {
            schema: self.schema.clone(),
            records: indices.iter().map(|&i| self.records[i].clone()).collect(),
            provenance: self.provenance.clone(),
        }
    }

    pub(crate) fn with_records(&self, records: Vec<PatientRecord>) -> Cohort {
        Cohort { schema: self.schema.clone(), records, provenance: self.provenance.clone() }
    }
}
