//! From-scratch binary classifiers and class-imbalance handling.

mod forest;
mod gbdt;
mod imbalance;
mod mlp;
mod ridge;

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use forest::{fit_forest, ClassificationTree, ForestParams, RandomForest, TreeNode};
pub use gbdt::{fit_gbdt, GbdtParams, GradientBoosting, RegressionNode, RegressionTree};
pub use imbalance::{class_weights, downsample_negatives};
pub use mlp::{fit_mlp, Mlp, MlpParams};
pub use ridge::{fit_ridge, RidgeModel};

use crate::cohort::{Cohort, Encoding, FeatureEncoder};
use crate::linalg::Matrix;
use crate::metrics::roc_auc;

/// Version tag written into saved model artifacts.
pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum LearnerError {
    #[error("training labels hold a single class")]
    SingleClass,
    #[error("need at least 2 samples per class after imbalance handling (got {positives} positive, {negatives} negative)")]
    TooFewSamples { positives: usize, negatives: usize },
    #[error("ridge system is singular at lambda = {lambda}; raise lambda")]
    SingularSystem { lambda: f64 },
    #[error("MLP training diverged (non-finite loss)")]
    NonConvergence,
    #[error("input has {found} columns, model expects {expected}")]
    SchemaMismatch { expected: usize, found: usize },
    #[error("input contains missing or non-finite values; impute first")]
    NonFiniteInput,
    #[error("{rows} rows but {labels} labels")]
    LengthMismatch { rows: usize, labels: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("model artifact: {0}")]
    Artifact(String),
    #[error(transparent)]
    Cohort(#[from] crate::cohort::CohortError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Ridge,
    RandomForest,
    GradBoost,
    Mlp,
}

impl ModelKind {
    pub const ALL: [ModelKind; 4] = [ModelKind::Ridge, ModelKind::RandomForest, ModelKind::GradBoost, ModelKind::Mlp];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Ridge => "ridge",
            ModelKind::RandomForest => "random_forest",
            ModelKind::GradBoost => "grad_boost",
            ModelKind::Mlp => "mlp",
        }
    }

    /// Ridge solves a closed-form system, so it drops the reference level
    /// of each one-hot group; the others see every level.
    pub fn encoding(self) -> Encoding {
        match self {
            ModelKind::Ridge => Encoding::DropReference,
            _ => Encoding::FullOneHot,
        }
    }

    pub fn default_imbalance(self) -> Imbalance {
        match self {
            ModelKind::Ridge | ModelKind::GradBoost => Imbalance::ClassWeights,
            ModelKind::RandomForest | ModelKind::Mlp => Imbalance::Downsample { keep_frac: 0.10 },
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = LearnerError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ModelKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| LearnerError::InvalidParameter(format!("unknown model kind `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "strategy", rename_all = "snake_case")]
pub enum Imbalance {
    /// Positives weighted by `(1 - q) / q`.
    ClassWeights,
    /// All positives plus a `keep_frac` share of negatives.
    Downsample { keep_frac: f64 },
    /// Train on the data as given.
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RidgeParams {
    pub lambda: f64,
}

impl Default for RidgeParams {
    fn default() -> Self {
        RidgeParams { lambda: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Hyperparameters {
    Ridge(#[serde(default)] RidgeParams),
    RandomForest(#[serde(default)] ForestParams),
    GradBoost(#[serde(default)] GbdtParams),
    Mlp(#[serde(default)] MlpParams),
}

impl Hyperparameters {
    pub fn kind(&self) -> ModelKind {
        match self {
            Hyperparameters::Ridge(_) => ModelKind::Ridge,
            Hyperparameters::RandomForest(_) => ModelKind::RandomForest,
            Hyperparameters::GradBoost(_) => ModelKind::GradBoost,
            Hyperparameters::Mlp(_) => ModelKind::Mlp,
        }
    }

    pub fn default_for(kind: ModelKind) -> Self {
        match kind {
            ModelKind::Ridge => Hyperparameters::Ridge(RidgeParams::default()),
            ModelKind::RandomForest => Hyperparameters::RandomForest(ForestParams::default()),
            ModelKind::GradBoost => Hyperparameters::GradBoost(GbdtParams::default()),
            ModelKind::Mlp => Hyperparameters::Mlp(MlpParams::default()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    #[serde(flatten)]
    pub hyperparameters: Hyperparameters,
    /// Falls back to the kind's default pairing when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub imbalance: Option<Imbalance>,
    #[serde(default)]
    pub seed: u64,
}

impl ModelSpec {
    pub fn new(kind: ModelKind, seed: u64) -> Self {
        ModelSpec { hyperparameters: Hyperparameters::default_for(kind), imbalance: None, seed }
    }

    pub fn kind(&self) -> ModelKind {
        self.hyperparameters.kind()
    }

    pub fn imbalance(&self) -> Imbalance {
        self.imbalance.unwrap_or_else(|| self.kind().default_imbalance())
    }

    pub fn with_imbalance(mut self, imbalance: Imbalance) -> Self {
        self.imbalance = Some(imbalance);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum FittedParams {
    Ridge(RidgeModel),
    RandomForest(RandomForest),
    GradBoost(GradientBoosting),
    Mlp(Mlp),
}

impl FittedParams {
    fn score(&self, row: &[f64]) -> f64 {
        match self {
            FittedParams::Ridge(m) => m.score(row),
            FittedParams::RandomForest(m) => m.score(row),
            FittedParams::GradBoost(m) => m.score(row),
            FittedParams::Mlp(m) => m.score(row),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub format_version: u32,
    pub spec: ModelSpec,
    pub n_features: usize,
    pub feature_names: Vec<String>,
    /// Present when the model was trained from a cohort; carries imputation
    /// means and the one-hot layout.
    pub encoder: Option<FeatureEncoder>,
    pub fitted: FittedParams,
    /// AUC on every training row (before downsampling).
    pub train_auc: Option<f64>,
    pub n_train: usize,
    /// Rows actually used after imbalance handling.
    pub n_used: usize,
    pub converged: bool,
}

/// Fits `spec` on `(x, y)`. `x` must be fully imputed.
pub fn train_model(spec: &ModelSpec, x: &Matrix, y: &[bool]) -> Result<TrainedModel, LearnerError> {
    if x.rows() != y.len() {
        return Err(LearnerError::LengthMismatch { rows: x.rows(), labels: y.len() });
    }
    if x.as_slice().iter().any(|v| !v.is_finite()) {
        return Err(LearnerError::NonFiniteInput);
    }
    let (rows, weights): (Vec<usize>, Vec<f64>) = match spec.imbalance() {
        Imbalance::ClassWeights => ((0..y.len()).collect(), class_weights(y)?),
        Imbalance::Downsample { keep_frac } => {
            let idx = downsample_negatives(y, keep_frac, spec.seed)?;
            let w = vec![1.0; idx.len()];
            (idx, w)
        }
        Imbalance::None => ((0..y.len()).collect(), vec![1.0; y.len()]),
    };
    let positives = rows.iter().filter(|&&i| y[i]).count();
    let negatives = rows.len() - positives;
    if positives < 2 || negatives < 2 {
        return Err(LearnerError::TooFewSamples { positives, negatives });
    }
    let used_all = rows.len() == y.len();
    let xs = if used_all { x.clone() } else { x.select_rows(&rows) };
    let ys: Vec<bool> = rows.iter().map(|&i| y[i]).collect();

    let mut converged = true;
    let fitted = match &spec.hyperparameters {
        Hyperparameters::Ridge(p) => FittedParams::Ridge(fit_ridge(&xs, &ys, &weights, p.lambda)?),
        Hyperparameters::RandomForest(p) => FittedParams::RandomForest(fit_forest(&xs, &ys, &weights, p, spec.seed)),
        Hyperparameters::GradBoost(p) => FittedParams::GradBoost(fit_gbdt(&xs, &ys, &weights, p)),
        Hyperparameters::Mlp(p) => {
            let net = fit_mlp(&xs, &ys, &weights, p, spec.seed);
            if net.params.iter().any(|v| !v.is_finite()) {
                return Err(LearnerError::NonConvergence);
            }
            let start = net.loss_trace.first().copied().unwrap_or(f64::INFINITY);
            let end = net.loss_trace.last().copied().unwrap_or(f64::INFINITY);
            if !(end.is_finite() && end <= start) {
                log::warn!("mlp did not converge: loss {start} -> {end}");
                converged = false;
            }
            FittedParams::Mlp(net)
        }
    };
    let mut model = TrainedModel {
        format_version: MODEL_FORMAT_VERSION,
        spec: spec.clone(),
        n_features: x.cols(),
        feature_names: (0..x.cols()).map(|c| format!("x{c}")).collect(),
        encoder: None,
        fitted,
        train_auc: None,
        n_train: y.len(),
        n_used: rows.len(),
        converged,
    };
    let scores = model.predict_scores(x)?;
    model.train_auc = roc_auc(&scores, y).ok();
    Ok(model)
}

/// Encodes `indices` of `cohort` with `encoder` and trains on them.
pub fn train_on_cohort(
    spec: &ModelSpec,
    cohort: &Cohort,
    indices: &[usize],
    encoder: FeatureEncoder,
) -> Result<TrainedModel, LearnerError> {
    let data = encoder.transform(cohort, indices)?;
    let mut model = train_model(spec, &data.x, &data.y)?;
    model.feature_names = encoder.column_names().to_vec();
    model.encoder = Some(encoder);
    Ok(model)
}

impl TrainedModel {
    pub fn kind(&self) -> ModelKind {
        self.spec.kind()
    }

    pub fn score_row(&self, row: &[f64]) -> f64 {
        self.fitted.score(row)
    }

    /// Scores in [0, 1], one per row.
    pub fn predict_scores(&self, x: &Matrix) -> Result<Vec<f64>, LearnerError> {
        if x.cols() != self.n_features {
            return Err(LearnerError::SchemaMismatch { expected: self.n_features, found: x.cols() });
        }
        if x.rows() < 256 {
            return Ok((0..x.rows()).map(|r| self.fitted.score(x.row(r))).collect());
        }
        Ok((0..x.rows()).into_par_iter().map(|r| self.fitted.score(x.row(r))).collect())
    }

    /// Encodes the given cohort rows with the stored encoder, then scores them.
    pub fn predict_cohort(&self, cohort: &Cohort, indices: &[usize]) -> Result<Vec<f64>, LearnerError> {
        let encoder = self
            .encoder
            .as_ref()
            .ok_or_else(|| LearnerError::Artifact("model carries no feature encoder".into()))?;
        let x = encoder.transform_x(cohort, indices)?;
        self.predict_scores(&x)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, LearnerError> {
        let value: serde_json::Value = serde_json::from_str(text).map_err(|e| LearnerError::Artifact(e.to_string()))?;
        let version = value.get("format_version").and_then(|v| v.as_u64());
        if version != Some(MODEL_FORMAT_VERSION as u64) {
            return Err(LearnerError::Artifact(format!("unsupported format_version {version:?}")));
        }
        serde_json::from_value(value).map_err(|e| LearnerError::Artifact(e.to_string()))
    }
}
