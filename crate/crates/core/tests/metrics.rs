use fairaudit::metrics::*;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn pairwise(scores: &[f64], labels: &[bool]) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for (i, &a) in labels.iter().enumerate() {
        for (j, &b) in labels.iter().enumerate() {
            if a && !b {
                den += 1.0;
                num += if scores[i] > scores[j] {
                    1.0
                } else if scores[i] == scores[j] {
                    0.5
                } else {
                    0.0
                };
            }
        }
    }
    num / den
}

fn scored_labels() -> impl Strategy<Value = (Vec<f64>, Vec<bool>)> {
    (2usize..120).prop_flat_map(|n| {
        (
            prop::collection::vec((0u8..12).prop_map(|v| v as f64 * 0.25), n),
            prop::collection::vec(any::<bool>(), n),
        )
            .prop_filter("both classes", |(_, y)| y.iter().any(|&v| v) && y.iter().any(|&v| !v))
    })
}

proptest! {
    #[test]
    fn auc_matches_pairwise_count((s, y) in scored_labels()) {
        let fast = roc_auc(&s, &y).unwrap();
        prop_assert!((fast - pairwise(&s, &y)).abs() < 1e-12);
        prop_assert!((0.0..=1.0).contains(&fast));
    }

    #[test]
    fn auc_invariant_under_monotone_maps((s, y) in scored_labels()) {
        let base = roc_auc(&s, &y).unwrap();
        let mapped: Vec<f64> = s.iter().map(|v| (3.0 * v - 1.0).exp()).collect();
        prop_assert_eq!(roc_auc(&mapped, &y).unwrap(), base);
        let flipped: Vec<f64> = s.iter().map(|v| -v).collect();
        prop_assert!((roc_auc(&flipped, &y).unwrap() - (1.0 - base)).abs() < 1e-12);
    }

    #[test]
    fn auc_invariant_under_row_order((s, y) in scored_labels(), seed in any::<u64>()) {
        let mut idx: Vec<usize> = (0..s.len()).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for i in (1..idx.len()).rev() {
            idx.swap(i, rng.random_range(0..=i));
        }
        let s2: Vec<f64> = idx.iter().map(|&i| s[i]).collect();
        let y2: Vec<bool> = idx.iter().map(|&i| y[i]).collect();
        prop_assert_eq!(roc_auc(&s2, &y2).unwrap(), roc_auc(&s, &y).unwrap());
    }
}

#[test]
fn auc_rejects_bad_input() {
    assert!(roc_auc(&[0.1, 0.2], &[true, true]).is_err());
    assert!(roc_auc(&[0.1], &[true, false]).is_err());
    assert!(roc_auc(&[f64::NAN, 0.2], &[true, false]).is_err());
}

#[test]
fn perfect_and_constant_scores() {
    let y = [false, false, true, true];
    assert_eq!(roc_auc(&[0.1, 0.2, 0.3, 0.4], &y).unwrap(), 1.0);
    assert_eq!(roc_auc(&[0.5; 4], &y).unwrap(), 0.5);
}

fn noisy(n: usize, shift: f64, seed: u64) -> (Vec<f64>, Vec<bool>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let y: Vec<bool> = (0..n).map(|_| rng.random_bool(0.3)).collect();
    let s = y.iter().map(|&l| rng.random::<f64>() + if l { shift } else { 0.0 }).collect();
    (s, y)
}

#[test]
fn bootstrap_is_reproducible_and_centred() {
    let (s, y) = noisy(400, 0.4, 1);
    let a = bootstrap_auc(&s, &y, 500, 9, true).unwrap();
    let b = bootstrap_auc(&s, &y, 500, 9, true).unwrap();
    assert_eq!(a, b);
    let point = roc_auc(&s, &y).unwrap();
    assert!((a.mean_auc - point).abs() < 3.0 * a.std_auc);
    assert!(a.std_auc > 0.0);
    assert_eq!(a.retained + a.skipped_degenerate, 500);
}

#[test]
fn bootstrap_worker_count_does_not_matter() {
    let (s, y) = noisy(300, 0.3, 2);
    let run = |t| {
        rayon::ThreadPoolBuilder::new().num_threads(t).build().unwrap().install(|| bootstrap_auc(&s, &y, 200, 4, false))
    };
    assert_eq!(run(1).unwrap(), run(3).unwrap());
}

#[test]
fn bootstrap_skips_single_class_draws() {
    let s = [0.1, 0.2, 0.3, 0.4, 0.5];
    let y = [false, false, false, false, true];
    let r = bootstrap_auc(&s, &y, 400, 3, false).unwrap();
    assert!(r.skipped_degenerate > 0);
    assert_eq!(r.retained + r.skipped_degenerate, 400);
    assert_eq!(r.mean_auc, 1.0);
}

#[test]
fn identical_models_are_indistinguishable() {
    let (s, y) = noisy(200, 0.3, 3);
    let r = permutation_test_paired_models(&s, &s, &y, 200, 1).unwrap();
    assert_eq!(r.gap, 0.0);
    assert_eq!(r.p_value, 1.0);
}

#[test]
fn whole_set_subgroup_has_zero_gap() {
    let (s, y) = noisy(200, 0.3, 4);
    let r = permutation_test_subgroup(&s, &y, &vec![true; 200], 100, 1).unwrap();
    assert_eq!(r.gap, 0.0);
    assert_eq!(r.p_value, 1.0);
}

#[test]
fn paired_test_detects_a_better_model() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let y: Vec<bool> = (0..600).map(|_| rng.random_bool(0.4)).collect();
    let truth: Vec<f64> = y.iter().map(|&l| rng.random::<f64>() + if l { 0.6 } else { 0.0 }).collect();
    let blurred: Vec<f64> = truth.iter().map(|v| v + rng.random::<f64>() * 2.0).collect();
    let r = permutation_test_paired_models(&truth, &blurred, &y, 500, 2).unwrap();
    assert!(r.gap > 0.0);
    assert!(r.p_value < 0.01);
    assert_eq!(r.method, PermutationMethod::PairedModels);
}

#[test]
fn p_value_floor_is_one_over_permutations_plus_one() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let y: Vec<bool> = (0..400).map(|i| i % 2 == 0).collect();
    let s: Vec<f64> = y.iter().enumerate().map(|(i, &l)| rng.random::<f64>() + if l && i < 100 { 5.0 } else { 0.0 }).collect();
    let mask: Vec<bool> = (0..400).map(|i| i < 100).collect();
    let r = permutation_test_subgroup(&s, &y, &mask, 99, 1).unwrap();
    assert_eq!(r.p_value, 1.0 / 100.0);
}

#[test]
fn thresholded_metrics() {
    let s = [0.9, 0.8, 0.4, 0.6, 0.1, 0.7];
    let y = [true, true, true, false, false, false];
    let (p, r, f1) = precision_recall_f1(&s, &y, 0.5);
    assert!((p - 0.5).abs() < 1e-12);
    assert!((r - 2.0 / 3.0).abs() < 1e-12);
    assert!((f1 - 2.0 * p * r / (p + r)).abs() < 1e-12);
}
