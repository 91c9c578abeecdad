use std::cmp::Ordering;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{exact_shapley, kernel_shap, sample_background, Players, Scorer, ShapError, MAX_EXACT_PLAYERS};
use crate::learners::TrainedModel;
use crate::linalg::Matrix;
use crate::rng::derive_seed;
use crate::rng::Stream;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ShapMethod {
    /// Exact enumeration up to 10 players, kernel estimation above.
    #[default]
    Auto,
    Exact,
    Kernel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ShapConfig {
    pub method: ShapMethod,
    pub background_size: usize,
    pub n_explain: usize,
    pub n_coalition_samples: usize,
    pub seed: u64,
}

impl Default for ShapConfig {
    fn default() -> Self {
        ShapConfig { method: ShapMethod::Auto, background_size: 100, n_explain: 100, n_coalition_samples: 1000, seed: 0 }
    }
}

/// Per-instance attributions, one column per player.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ShapMatrix {
    pub feature_names: Vec<String>,
    /// Mean score over the background.
    pub base_value: f64,
    pub attributions: Matrix,
    /// Player value per instance; one-hot groups report `1 + level`, or 0
    /// when no column of the group is set.
    pub feature_values: Matrix,
    pub predictions: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FeatureImportance {
    pub rank: usize,
    pub feature: String,
    pub mean_abs_shap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ShapSummary {
    /// Sorted by decreasing importance, ties by name.
    pub features: Vec<FeatureImportance>,
}

/// Attributions for every row of `x` against `background`.
pub fn shap_matrix(
    scorer: &dyn Scorer,
    x: &Matrix,
    background: &Matrix,
    players: &Players,
    feature_names: &[String],
    config: &ShapConfig,
) -> Result<ShapMatrix, ShapError> {
    if x.rows() == 0 {
        return Err(ShapError::EmptySample);
    }
    if feature_names.len() != players.len() {
        return Err(ShapError::InvalidArgument(format!(
            "{} names for {} players",
            feature_names.len(),
            players.len()
        )));
    }
    let exact = match config.method {
        ShapMethod::Exact => true,
        ShapMethod::Kernel => false,
        ShapMethod::Auto => players.len() <= 10,
    };
    if exact && players.len() > MAX_EXACT_PLAYERS {
        return Err(ShapError::TooManyFeatures { players: players.len(), limit: MAX_EXACT_PLAYERS });
    }
    let rows: Vec<Vec<f64>> = (0..x.rows())
        .into_par_iter()
        .map(|r| {
            if exact {
                exact_shapley(scorer, x.row(r), background, players)
            } else {
                let seed = derive_seed(config.seed, Stream::ShapSample, r as u64);
                kernel_shap(scorer, x.row(r), background, players, config.n_coalition_samples, seed)
            }
        })
        .collect::<Result<_, _>>()?;
    let base = scorer.score_rows(background);
    let base_value = base.iter().sum::<f64>() / base.len() as f64;
    let mut values = Matrix::zeros(x.rows(), players.len());
    for r in 0..x.rows() {
        for p in 0..players.len() {
            let cols = players.columns(p);
            let v = if cols.len() == 1 {
                x.get(r, cols[0])
            } else {
                cols.iter().enumerate().map(|(k, &c)| (k + 1) as f64 * x.get(r, c)).sum()
            };
            values.set(r, p, v);
        }
    }
    Ok(ShapMatrix {
        feature_names: feature_names.to_vec(),
        base_value,
        attributions: Matrix::from_rows(&rows),
        feature_values: values,
        predictions: scorer.score_rows(x),
    })
}

/// Explains a cohort-trained model on encoded rows `x`, grouping one-hot
/// columns back into their source features. Background and explained rows
/// are both drawn from `x`.
pub fn explain_model(model: &TrainedModel, x: &Matrix, config: &ShapConfig) -> Result<ShapMatrix, ShapError> {
    let (players, names) = match &model.encoder {
        Some(enc) => (Players::from_ranges(&enc.groups()), enc.source_names().iter().map(|s| s.to_string()).collect()),
        None => (Players::singletons(model.n_features), model.feature_names.clone()),
    };
    let background = sample_background(x, config.background_size, config.seed);
    let explain = sample_background(x, config.n_explain, derive_seed(config.seed, Stream::ShapSample, u64::MAX));
    shap_matrix(model, &explain, &background, &players, &names, config)
}

impl ShapMatrix {
    /// `instance,prediction,<feature...>` with attributions as values.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("instance,prediction");
        for name in &self.feature_names {
            out.push(',');
            out.push_str(name);
        }
        out.push('\n');
        for r in 0..self.attributions.rows() {
            let _ = write!(out, "{r},{}", self.predictions[r]);
            for v in self.attributions.row(r) {
                let _ = write!(out, ",{v}");
            }
            out.push('\n');
        }
        out
    }
}

/// Global importance: mean absolute attribution per player.
pub fn shap_summary(matrix: &ShapMatrix) -> ShapSummary {
    let n = matrix.attributions.rows().max(1) as f64;
    let mut features: Vec<FeatureImportance> = matrix
        .feature_names
        .iter()
        .enumerate()
        .map(|(p, name)| FeatureImportance {
            rank: 0,
            feature: name.clone(),
            mean_abs_shap: matrix.attributions.column(p).iter().map(|v| v.abs()).sum::<f64>() / n,
        })
        .collect();
    features.sort_by(|a, b| {
        b.mean_abs_shap.partial_cmp(&a.mean_abs_shap).unwrap_or(Ordering::Equal).then_with(|| a.feature.cmp(&b.feature))
    });
    for (i, f) in features.iter_mut().enumerate() {
        f.rank = i + 1;
    }
    ShapSummary { features }
}

impl ShapSummary {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("rank,feature,mean_abs_shap\n");
        for f in &self.features {
            let _ = writeln!(out, "{},{},{}", f.rank, f.feature, f.mean_abs_shap);
        }
        out
    }

    pub fn top(&self, k: usize) -> Vec<&str> {
        self.features.iter().take(k).map(|f| f.feature.as_str()).collect()
    }
}
