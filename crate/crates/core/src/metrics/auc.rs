use super::MetricsError;

/// Scores sorted once, with tie groups marked, so that AUC can be recomputed
/// in linear time for any integer weighting of the samples (subsets,
/// bootstrap multiplicities).
#[derive(Debug, Clone)]
pub struct RankedScores {
    order: Vec<usize>,
    /// Exclusive end (into `order`) of each tie group, ascending by score.
    group_ends: Vec<usize>,
    labels: Vec<bool>,
}

/// Pair counts behind an AUC. `twice_concordant_plus_ties` is
/// `2 * concordant + tied`, so the AUC is exact rational arithmetic up to the
/// final division.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PairCounts {
    pub positives: u64,
    pub negatives: u64,
    pub twice_concordant_plus_ties: u128,
}

impl PairCounts {
    pub fn auc(&self) -> Option<f64> {
        if self.positives == 0 || self.negatives == 0 {
            return None;
        }
        let pairs = 2 * self.positives as u128 * self.negatives as u128;
        Some(self.twice_concordant_plus_ties as f64 / pairs as f64)
    }
}

impl RankedScores {
    pub fn new(scores: &[f64], labels: &[bool]) -> Result<Self, MetricsError> {
        if scores.len() != labels.len() {
            return Err(MetricsError::LengthMismatch { scores: scores.len(), labels: labels.len() });
        }
        if scores.iter().any(|s| !s.is_finite()) {
            return Err(MetricsError::NonFiniteScore);
        }
        let mut order: Vec<usize> = (0..scores.len()).collect();
        order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
        let mut group_ends = Vec::new();
        for k in 1..order.len() {
            if scores[order[k]] != scores[order[k - 1]] {
                group_ends.push(k);
            }
        }
        if !order.is_empty() {
            group_ends.push(order.len());
        }
        Ok(RankedScores { order, group_ends, labels: labels.to_vec() })
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    /// Pair counts where sample `i` appears `weight(i)` times.
    pub fn counts_weighted(&self, weight: impl Fn(usize) -> u64) -> PairCounts {
        let mut neg_below: u64 = 0;
        let mut pos_total: u64 = 0;
        let mut acc: u128 = 0;
        let mut start = 0;
        for &end in &self.group_ends {
            let (mut p, mut q) = (0u64, 0u64);
            for &i in &self.order[start..end] {
                let w = weight(i);
                if self.labels[i] {
                    p += w;
                } else {
                    q += w;
                }
            }
            acc += 2 * p as u128 * neg_below as u128 + p as u128 * q as u128;
            neg_below += q;
            pos_total += p;
            start = end;
        }
        PairCounts { positives: pos_total, negatives: neg_below, twice_concordant_plus_ties: acc }
    }

    pub fn counts(&self) -> PairCounts {
        self.counts_weighted(|_| 1)
    }

    pub fn auc(&self) -> Result<f64, MetricsError> {
        self.counts().auc().ok_or(MetricsError::SingleClass)
    }

    /// AUC over the samples flagged in `mask`; `None` when the subset holds one class.
    pub fn auc_masked(&self, mask: &[bool]) -> Option<f64> {
        self.counts_weighted(|i| mask[i] as u64).auc()
    }
}

/// ROC-AUC in its Mann-Whitney form: the fraction of (positive, negative)
/// pairs ranked correctly, ties counting one half. O(n log n).
pub fn roc_auc(scores: &[f64], labels: &[bool]) -> Result<f64, MetricsError> {
    RankedScores::new(scores, labels)?.auc()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_separation() {
        let auc = roc_auc(&[0.9, 0.8, 0.2, 0.1], &[true, true, false, false]).unwrap();
        assert_eq!(auc, 1.0);
    }

    #[test]
    fn all_ties_is_half() {
        assert_eq!(roc_auc(&[0.3; 6], &[true, false, true, false, false, false]).unwrap(), 0.5);
    }

    #[test]
    fn two_of_four_pairs_concordant() {
        // positives 0.8, 0.2; negatives 0.4, 0.6: (0.8>0.4),(0.8>0.6) win, 0.2 loses both
        let auc = roc_auc(&[0.8, 0.4, 0.6, 0.2], &[true, false, false, true]).unwrap();
        assert_eq!(auc, 0.5);
    }

    #[test]
    fn single_class_is_an_error() {
        assert!(matches!(roc_auc(&[0.1, 0.2], &[true, true]), Err(MetricsError::SingleClass)));
        assert!(matches!(roc_auc(&[], &[]), Err(MetricsError::SingleClass)));
    }

    #[test]
    fn rejects_nan_and_length_mismatch() {
        assert!(matches!(roc_auc(&[f64::NAN, 0.2], &[true, false]), Err(MetricsError::NonFiniteScore)));
        assert!(matches!(roc_auc(&[0.1], &[true, false]), Err(MetricsError::LengthMismatch { .. })));
    }

    #[test]
    fn weighted_counts_match_duplication() {
        let scores = [0.1, 0.5, 0.5, 0.9, 0.3];
        let labels = [false, true, false, true, true];
        let weights = [2u64, 0, 3, 1, 2];
        let ranked = RankedScores::new(&scores, &labels).unwrap();
        let weighted = ranked.counts_weighted(|i| weights[i]).auc().unwrap();
        let (mut s, mut l) = (Vec::new(), Vec::new());
        for i in 0..5 {
            for _ in 0..weights[i] {
                s.push(scores[i]);
                l.push(labels[i]);
            }
        }
        assert_eq!(weighted, roc_auc(&s, &l).unwrap());
    }
}
