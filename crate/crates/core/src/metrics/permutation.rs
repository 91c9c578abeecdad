//! Permutation tests for AUC differences. Both tests are two-sided and use
//! `p = (1 + #{|T_perm| >= |T_obs|}) / (valid permutations + 1)`.

use rand::seq::index::sample;
use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{roc_auc, MetricsError, RankedScores};
use crate::rng::{stream_rng, Stream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PermutationMethod {
    /// Subgroup vs. the full test set it belongs to: the null redraws a
    /// random subset of the subgroup's size from the full test set.
    SubgroupMembership,
    /// Two models scored on the same samples: the null swaps the two
    /// scores of each sample with probability one half.
    PairedModels,
}

impl PermutationMethod {
    pub fn tag(self) -> &'static str {
        match self {
            PermutationMethod::SubgroupMembership => "subgroup-membership",
            PermutationMethod::PairedModels => "paired-models",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonResult {
    pub baseline_auc: f64,
    pub variant_auc: f64,
    /// `variant_auc - baseline_auc`.
    pub gap: f64,
    pub p_value: f64,
    pub method: PermutationMethod,
    /// Permutations that produced a usable statistic.
    pub permutations: usize,
    /// Drawn permutations whose statistic was undefined (single-class subset).
    pub skipped_degenerate: usize,
}

// relative slack so that exactly-equal statistics count as extreme
const TIE_SLACK: f64 = 1e-12;

fn p_value(stats: &[Option<f64>], observed: f64) -> (f64, usize, usize) {
    let valid: Vec<f64> = stats.iter().flatten().copied().collect();
    let thresh = observed.abs() - TIE_SLACK * observed.abs().max(1.0);
    let extreme = valid.iter().filter(|t| t.abs() >= thresh).count();
    let p = (1 + extreme) as f64 / (valid.len() + 1) as f64;
    (p, valid.len(), stats.len() - valid.len())
}

/// Tests whether the AUC on the masked subgroup differs from the AUC on the
/// whole test set. `T = AUC(subgroup) - AUC(full)`.
pub fn permutation_test_subgroup(
    scores: &[f64],
    labels: &[bool],
    subgroup_mask: &[bool],
    permutations: usize,
    seed: u64,
) -> Result<ComparisonResult, MetricsError> {
    if subgroup_mask.len() != scores.len() {
        return Err(MetricsError::LengthMismatch { scores: scores.len(), labels: subgroup_mask.len() });
    }
    if permutations == 0 {
        return Err(MetricsError::InvalidArgument("permutations must be positive".into()));
    }
    let ranked = RankedScores::new(scores, labels)?;
    let full_auc = ranked.auc()?;
    let sub_auc = ranked.auc_masked(subgroup_mask).ok_or(MetricsError::DegenerateSubgroup)?;
    let n = scores.len();
    let m = subgroup_mask.iter().filter(|&&b| b).count();
    let observed = sub_auc - full_auc;

    let stats: Vec<Option<f64>> = (0..permutations)
        .into_par_iter()
        .map(|j| {
            let mut rng = stream_rng(seed, Stream::Permutation, j as u64);
            let mut mask = vec![false; n];
            for i in sample(&mut rng, n, m) {
                mask[i] = true;
            }
            ranked.auc_masked(&mask).map(|a| a - full_auc)
        })
        .collect();
    let (p, valid, skipped) = p_value(&stats, observed);
    if valid == 0 {
        return Err(MetricsError::AllDegenerate);
    }
    Ok(ComparisonResult {
        baseline_auc: full_auc,
        variant_auc: sub_auc,
        gap: observed,
        p_value: p,
        method: PermutationMethod::SubgroupMembership,
        permutations: valid,
        skipped_degenerate: skipped,
    })
}

/// Tests whether two models scored on the same labels differ in AUC.
/// `T = AUC(a) - AUC(b)`; `a` is the variant, `b` the baseline.
pub fn permutation_test_paired_models(
    scores_a: &[f64],
    scores_b: &[f64],
    labels: &[bool],
    permutations: usize,
    seed: u64,
) -> Result<ComparisonResult, MetricsError> {
    if scores_a.len() != scores_b.len() {
        return Err(MetricsError::LengthMismatch { scores: scores_a.len(), labels: scores_b.len() });
    }
    if permutations == 0 {
        return Err(MetricsError::InvalidArgument("permutations must be positive".into()));
    }
    let auc_a = roc_auc(scores_a, labels)?;
    let auc_b = roc_auc(scores_b, labels)?;
    let observed = auc_a - auc_b;
    let n = labels.len();
    let stats: Vec<Option<f64>> = (0..permutations)
        .into_par_iter()
        .map(|j| {
            let mut rng = stream_rng(seed, Stream::Permutation, j as u64);
            let mut a = Vec::with_capacity(n);
            let mut b = Vec::with_capacity(n);
            for i in 0..n {
                if rng.random_bool(0.5) {
                    a.push(scores_b[i]);
                    b.push(scores_a[i]);
                } else {
                    a.push(scores_a[i]);
                    b.push(scores_b[i]);
                }
            }
            Some(roc_auc(&a, labels).ok()? - roc_auc(&b, labels).ok()?)
        })
        .collect();
    let (p, valid, skipped) = p_value(&stats, observed);
    Ok(ComparisonResult {
        baseline_auc: auc_b,
        variant_auc: auc_a,
        gap: observed,
        p_value: p,
        method: PermutationMethod::PairedModels,
        permutations: valid,
        skipped_degenerate: skipped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy(n: usize) -> (Vec<f64>, Vec<bool>) {
        let labels: Vec<bool> = (0..n).map(|i| i % 3 == 0).collect();
        let scores: Vec<f64> = (0..n).map(|i| ((i * 7919) % 101) as f64 / 101.0 + labels[i] as u8 as f64 * 0.2).collect();
        (scores, labels)
    }

    #[test]
    fn full_mask_is_self_comparison() {
        let (s, l) = toy(60);
        let r = permutation_test_subgroup(&s, &l, &[true; 60], 99, 4).unwrap();
        assert_eq!(r.gap, 0.0);
        assert_eq!(r.p_value, 1.0);
        assert_eq!(r.permutations, 99);
    }

    #[test]
    fn identical_models() {
        let (s, l) = toy(60);
        let r = permutation_test_paired_models(&s, &s, &l, 99, 4).unwrap();
        assert_eq!(r.gap, 0.0);
        assert_eq!(r.p_value, 1.0);
    }

    #[test]
    fn argument_order_negates_gap() {
        let (s, l) = toy(80);
        let other: Vec<f64> = s.iter().enumerate().map(|(i, v)| v + ((i * 13) % 7) as f64 * 0.05).collect();
        let ab = permutation_test_paired_models(&s, &other, &l, 199, 11).unwrap();
        let ba = permutation_test_paired_models(&other, &s, &l, 199, 11).unwrap();
        assert_eq!(ab.gap, -ba.gap);
        assert_eq!(ab.p_value, ba.p_value);
    }

    #[test]
    fn smallest_p_is_one_over_b_plus_one() {
        let labels: Vec<bool> = (0..200).map(|i| i < 100).collect();
        let perfect: Vec<f64> = labels.iter().map(|&y| if y { 1.0 } else { 0.0 }).collect();
        let flat = vec![0.5; 200];
        for b in [9usize, 99, 999] {
            let r = permutation_test_paired_models(&perfect, &flat, &labels, b, 2).unwrap();
            assert_eq!(r.p_value, 1.0 / (b + 1) as f64);
        }
    }

    #[test]
    fn degenerate_subgroup() {
        let (s, l) = toy(30);
        let mask: Vec<bool> = l.iter().map(|&y| y).collect();
        assert!(matches!(
            permutation_test_subgroup(&s, &l, &mask, 10, 1),
            Err(MetricsError::DegenerateSubgroup)
        ));
    }
}
