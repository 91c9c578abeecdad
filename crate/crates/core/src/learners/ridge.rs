//! Weighted ridge regression on {0, 1} targets.

use serde::{Deserialize, Serialize};

use super::LearnerError;
use crate::linalg::{cholesky_solve, Matrix};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RidgeModel {
    pub intercept: f64,
    pub coefficients: Vec<f64>,
    /// Range of linear outputs over the training rows, used to map scores into [0, 1].
    pub score_min: f64,
    pub score_max: f64,
}

/// Solves `(X'WX + lambda*I) beta = X'Wy` with an unpenalized intercept.
pub fn fit_ridge(x: &Matrix, y: &[bool], weights: &[f64], lambda: f64) -> Result<RidgeModel, LearnerError> {
    if !(lambda >= 0.0) {
        return Err(LearnerError::InvalidParameter(format!("ridge lambda {lambda} must be non-negative")));
    }
    let p = x.cols() + 1;
    let mut a = vec![0.0; p * p];
    let mut b = vec![0.0; p];
    let mut z = vec![0.0; p];
    for r in 0..x.rows() {
        z[0] = 1.0;
        z[1..].copy_from_slice(x.row(r));
        let w = weights[r];
        let t = if y[r] { w } else { 0.0 };
        for i in 0..p {
            let wzi = w * z[i];
            if wzi != 0.0 {
                for j in 0..=i {
                    a[i * p + j] += wzi * z[j];
                }
            }
            b[i] += t * z[i];
        }
    }
    for i in 0..p {
        for j in 0..i {
            a[j * p + i] = a[i * p + j];
        }
        if i > 0 {
            a[i * p + i] += lambda;
        }
    }
    let beta = cholesky_solve(&a, &b, p).map_err(|_| LearnerError::SingularSystem { lambda })?;
    let mut model = RidgeModel {
        intercept: beta[0],
        coefficients: beta[1..].to_vec(),
        score_min: 0.0,
        score_max: 0.0,
    };
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for r in 0..x.rows() {
        let s = model.linear(x.row(r));
        lo = lo.min(s);
        hi = hi.max(s);
    }
    model.score_min = lo;
    model.score_max = hi;
    Ok(model)
}

impl RidgeModel {
    pub fn linear(&self, row: &[f64]) -> f64 {
        self.intercept + self.coefficients.iter().zip(row).map(|(c, v)| c * v).sum::<f64>()
    }

    /// Linear output mapped monotonically into [0, 1] by the training range.
    pub fn score(&self, row: &[f64]) -> f64 {
        let span = self.score_max - self.score_min;
        if !(span > 0.0) {
            return 0.5;
        }
        ((self.linear(row) - self.score_min) / span).clamp(0.0, 1.0)
    }
}
