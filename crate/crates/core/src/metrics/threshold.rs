use serde::{Deserialize, Serialize};

use super::{roc_auc, MetricsError};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub auc: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub n: usize,
    pub n_pos: usize,
}

/// Precision, recall and F1 with a sample predicted positive iff its score is
/// at least `threshold`. Zero denominators yield 0.
pub fn precision_recall_f1(scores: &[f64], labels: &[bool], threshold: f64) -> (f64, f64, f64) {
    let (mut tp, mut fp, mut fn_) = (0usize, 0usize, 0usize);
    for (&s, &y) in scores.iter().zip(labels) {
        match (s >= threshold, y) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            (false, false) => {}
        }
    }
    let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    let precision = ratio(tp, tp + fp);
    let recall = ratio(tp, tp + fn_);
    let f1 = if precision + recall == 0.0 { 0.0 } else { 2.0 * precision * recall / (precision + recall) };
    (precision, recall, f1)
}

pub fn metrics_record(scores: &[f64], labels: &[bool], threshold: f64) -> Result<MetricsRecord, MetricsError> {
    let auc = roc_auc(scores, labels)?;
    let (precision, recall, f1) = precision_recall_f1(scores, labels, threshold);
    Ok(MetricsRecord {
        auc,
        precision,
        recall,
        f1,
        n: labels.len(),
        n_pos: labels.iter().filter(|&&y| y).count(),
    })
}
