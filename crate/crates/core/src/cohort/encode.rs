//! Turns cohort records into numeric design matrices.
//!
//! Numeric and binary columns are mean-imputed with means frozen from the
//! rows the encoder was fitted on. Categorical columns are one-hot encoded;
//! the reference (first) level can be dropped for learners that solve a
//! closed-form system. A missing categorical value encodes as all zeros.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use super::record::{Cohort, Value};
use super::schema::{ColumnKind, FeatureSet};
use super::CohortError;
use crate::linalg::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Encoding {
    /// One indicator per level.
    FullOneHot,
    /// One indicator per level except the first.
    DropReference,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
enum ColumnTransform {
    Numeric { mean: f64 },
    OneHot { levels: Vec<String>, first_level: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct EncodedSource {
    schema_column: usize,
    name: String,
    transform: ColumnTransform,
    range: Range<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureEncoder {
    pub feature_set: FeatureSet,
    pub encoding: Encoding,
    sources: Vec<EncodedSource>,
    names: Vec<String>,
}

/// Encoded features plus labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub x: Matrix,
    pub y: Vec<bool>,
}

impl FeatureEncoder {
    /// Fits imputation means on `indices` of `cohort`.
    pub fn fit(cohort: &Cohort, indices: &[usize], set: FeatureSet, encoding: Encoding) -> Self {
        let schema = cohort.schema();
        let mut sources = Vec::new();
        let mut names = Vec::new();
        for ci in schema.feature_set_columns(set) {
            let spec = &schema.columns()[ci];
            let start = names.len();
            let transform = match spec.kind {
                ColumnKind::Numeric | ColumnKind::Binary => {
                    let (mut sum, mut count) = (0.0, 0usize);
                    for &i in indices {
                        if let Some(Value::Number(v)) = cohort.records()[i].value(schema, ci) {
                            sum += v;
                            count += 1;
                        }
                    }
                    names.push(spec.name.clone());
                    ColumnTransform::Numeric { mean: if count > 0 { sum / count as f64 } else { 0.0 } }
                }
                ColumnKind::Categorical => {
                    let first_level = match encoding {
                        Encoding::FullOneHot => 0,
                        Encoding::DropReference => 1,
                    };
                    for level in &spec.categories[first_level..] {
                        names.push(format!("{}={}", spec.name, level));
                    }
                    ColumnTransform::OneHot { levels: spec.categories.clone(), first_level }
                }
            };
            sources.push(EncodedSource {
                schema_column: ci,
                name: spec.name.clone(),
                transform,
                range: start..names.len(),
            });
        }
        FeatureEncoder { feature_set: set, encoding, sources, names }
    }

    /// Encoded column names, in matrix order.
    pub fn column_names(&self) -> &[String] {
        &self.names
    }

    pub fn n_columns(&self) -> usize {
        self.names.len()
    }

    /// Source (pre-encoding) column names.
    pub fn source_names(&self) -> Vec<&str> {
        self.sources.iter().map(|s| s.name.as_str()).collect()
    }

    /// Encoded column ranges belonging to each source column; one-hot
    /// indicators of a categorical column share a range.
    pub fn groups(&self) -> Vec<Range<usize>> {
        self.sources.iter().map(|s| s.range.clone()).collect()
    }

    /// Imputation mean of a numeric/binary source column.
    pub fn imputation_mean(&self, name: &str) -> Option<f64> {
        self.sources.iter().find(|s| s.name == name).and_then(|s| match s.transform {
            ColumnTransform::Numeric { mean } => Some(mean),
            ColumnTransform::OneHot { .. } => None,
        })
    }

    pub fn transform_x(&self, cohort: &Cohort, indices: &[usize]) -> Result<Matrix, CohortError> {
        let schema = cohort.schema();
        for s in &self.sources {
            let ok = schema.columns().get(s.schema_column).is_some_and(|c| c.name == s.name);
            if !ok {
                return Err(CohortError::SchemaMismatch(format!("cohort lacks column `{}`", s.name)));
            }
        }
        let mut x = Matrix::zeros(indices.len(), self.names.len());
        for (row, &i) in indices.iter().enumerate() {
            let record = &cohort.records()[i];
            let out = x.row_mut(row);
            for s in &self.sources {
                let v = record.value(schema, s.schema_column);
                match &s.transform {
                    ColumnTransform::Numeric { mean } => {
                        out[s.range.start] = match v {
                            Some(Value::Number(x)) => x,
                            _ => *mean,
                        };
                    }
                    ColumnTransform::OneHot { first_level, .. } => {
                        if let Some(Value::Level(l)) = v {
                            let l = l as usize;
                            if l >= *first_level {
                                out[s.range.start + l - first_level] = 1.0;
                            }
                        }
                    }
                }
            }
        }
        Ok(x)
    }

    pub fn transform(&self, cohort: &Cohort, indices: &[usize]) -> Result<Dataset, CohortError> {
        Ok(Dataset { x: self.transform_x(cohort, indices)?, y: cohort.labels(indices)? })
    }
}

/// Encodes a feature set for `indices`, fitting imputation on those same rows.
pub fn select_features(
    cohort: &Cohort,
    set: FeatureSet,
    indices: &[usize],
    encoding: Encoding,
) -> Result<(FeatureEncoder, Dataset), CohortError> {
    let encoder = FeatureEncoder::fit(cohort, indices, set, encoding);
    let data = encoder.transform(cohort, indices)?;
    Ok((encoder, data))
}
