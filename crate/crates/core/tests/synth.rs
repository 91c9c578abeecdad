use fairaudit::cohort::{
    apply_exclusions, demographics_table, split_train_test, FeatureEncoder, FeatureSchema, FeatureSet, Gender, Race,
};
use fairaudit::learners::{train_on_cohort, ModelKind, ModelSpec};
use fairaudit::metrics::roc_auc;
use fairaudit::synth::*;
use fairaudit::Cohort;
use statrs::distribution::{ContinuousCDF, Normal};

fn held_out_auc(cohort: &Cohort, kind: ModelKind, rows: Option<&dyn Fn(usize) -> bool>) -> f64 {
    let split = split_train_test(cohort, 0.7, 1).unwrap();
    let enc = FeatureEncoder::fit(cohort, &split.train, FeatureSet::Full, kind.encoding());
    let model = train_on_cohort(&ModelSpec::new(kind, 2), cohort, &split.train, enc).unwrap();
    let test: Vec<usize> = split.test.iter().copied().filter(|&i| rows.map_or(true, |f| f(i))).collect();
    let scores = model.predict_cohort(cohort, &test).unwrap();
    roc_auc(&scores, &cohort.labels(&test).unwrap()).unwrap()
}

#[test]
fn default_marginals_track_targets() {
    let cfg = SynthConfig::default();
    let cohort = generate_cohort(&cfg).unwrap();
    assert_eq!(cohort.len(), 33_330);
    let table = demographics_table(&cohort).unwrap();
    for (race, n) in [("Black", 3283), ("Asian", 688), ("Hispanic", 1180), ("White", 23910), ("Total", 33330)] {
        let col = table.column(race).unwrap();
        assert_eq!(col.n, n, "{race}");
    }
    let white = table.column("White").unwrap();
    assert_eq!(white.hyperchloremia, 1382);
    let female = white.female as f64 / white.n as f64;
    assert!((female - 10109.0 / 23910.0).abs() < 0.02, "{female}");
    let median = white.age_median.unwrap();
    assert!((median - 66.9).abs() < 1.0, "{median}");
    let iqr = white.age_iqr.unwrap();
    assert!((iqr - 24.6).abs() < 1.5, "{iqr}");
    let medicare = white.insurance[1] as f64 / white.n as f64;
    assert!((medicare - 13612.0 / 23909.0).abs() < 0.02, "{medicare}");
}

#[test]
fn prevalence_matches_at_scale() {
    let cfg = SynthConfig { n: 50_000, seed: 4, ..Default::default() };
    let cohort = generate_cohort(&cfg).unwrap();
    let positives = cohort.records().iter().filter(|r| r.label == Some(true)).count();
    let expected: f64 = Race::ALL.iter().map(|&r| cfg.race_mix.get(r) * cfg.prevalence.get(r)).sum::<f64>() * 50_000.0;
    assert!((positives as f64 - expected).abs() <= 5.0, "{positives} vs {expected}");
    let rate = positives as f64 / 50_000.0;
    assert!((rate - 0.0598).abs() < 0.002, "{rate}");
}

#[test]
fn generation_is_deterministic_and_seed_sensitive() {
    let cfg = SynthConfig { n: 2000, seed: 6, ..Default::default() };
    let a = generate_cohort(&cfg).unwrap();
    let b = generate_cohort(&cfg).unwrap();
    assert_eq!(a.records(), b.records());
    let c = generate_cohort(&SynthConfig { seed: 7, ..cfg }).unwrap();
    assert_ne!(a.records(), c.records());
}

#[test]
fn gradient_boosting_approaches_the_bayes_auc() {
    let mut plan = SignalPlan::null();
    plan.effects.insert("sodium_max".into(), 0.8);
    plan.effects.insert("temperature_max".into(), 0.6);
    let norm = (0.8f64.powi(2) + 0.6f64.powi(2)).sqrt();
    let bayes = Normal::new(0.0, 1.0).unwrap().cdf(norm / 2f64.sqrt());
    let mut cfg = SynthConfig { n: 30_000, seed: 8, signal: plan, ..Default::default() };
    cfg.prevalence = PerRace { black: 0.2, asian: 0.2, hispanic: 0.2, white: 0.2, unknown: 0.2 };
    let cohort = generate_cohort(&cfg).unwrap();
    let auc = held_out_auc(&cohort, ModelKind::GradBoost, None);
    assert!((auc - bayes).abs() < 0.05, "AUC {auc} vs Bayes {bayes}");
}

#[test]
fn null_plan_is_unlearnable() {
    let mut cfg = SynthConfig { n: 30_000, seed: 9, signal: SignalPlan::null(), ..Default::default() };
    cfg.prevalence = PerRace { black: 0.2, asian: 0.2, hispanic: 0.2, white: 0.2, unknown: 0.2 };
    let cohort = generate_cohort(&cfg).unwrap();
    let auc = held_out_auc(&cohort, ModelKind::GradBoost, None);
    assert!((auc - 0.5).abs() < 0.03, "{auc}");
}

#[test]
fn label_noise_erases_signal_in_one_race() {
    let mut plan = SignalPlan::null();
    plan.effects.insert("sodium_max".into(), 1.5);
    plan.label_noise.insert("Race:Black".into(), 1.0);
    let mut cfg = SynthConfig { n: 20_000, seed: 10, signal: plan, ..Default::default() };
    cfg.race_mix = PerRace { black: 0.4, asian: 0.05, hispanic: 0.05, white: 0.4, unknown: 0.1 };
    cfg.prevalence = PerRace { black: 0.2, asian: 0.2, hispanic: 0.2, white: 0.2, unknown: 0.2 };
    let cohort = generate_cohort(&cfg).unwrap();
    let recs = cohort.records();
    let black = held_out_auc(&cohort, ModelKind::GradBoost, Some(&|i| recs[i].race == Race::Black));
    let white = held_out_auc(&cohort, ModelKind::GradBoost, Some(&|i| recs[i].race == Race::White));
    assert!((black - 0.5).abs() < 0.05, "{black}");
    assert!(white > 0.8, "{white}");
}

#[test]
fn sdoh_effect_raises_female_rate() {
    let mut plan = SignalPlan::null();
    plan.sdoh.female = 1.0;
    let cohort = generate_cohort(&SynthConfig { n: 30_000, seed: 11, signal: plan, ..Default::default() }).unwrap();
    let rate = |g: Gender| {
        let rs: Vec<_> = cohort.records().iter().filter(|r| r.gender == g).collect();
        rs.iter().filter(|r| r.label == Some(true)).count() as f64 / rs.len() as f64
    };
    assert!(rate(Gender::Female) > 1.5 * rate(Gender::Male));
}

#[test]
fn exclusion_fraction_round_trips_through_exclusions() {
    let cfg = SynthConfig { n: 3000, seed: 12, exclusion_fraction: 0.2, ..Default::default() };
    let cohort = generate_cohort(&cfg).unwrap();
    assert_eq!(cohort.len(), 3600);
    let (kept, report) = apply_exclusions(&cohort);
    assert_eq!(kept.len(), 3000);
    assert_eq!(report.retained, 3000);
}

#[test]
fn missing_rates_apply_to_extra_columns() {
    let mut plan = SignalPlan::default_icu();
    plan.missing_rate.insert("lactate_max".into(), 0.3);
    let cohort = generate_cohort(&SynthConfig { n: 5000, seed: 13, signal: plan, ..Default::default() }).unwrap();
    let schema = FeatureSchema::default_icu();
    let missing = cohort.records().iter().filter(|r| r.feature(&schema, "lactate_max").is_none()).count();
    let frac = missing as f64 / 5000.0;
    assert!((frac - 0.3).abs() < 0.03, "{frac}");
}

#[test]
fn invalid_signal_plans_are_rejected() {
    let mut plan = SignalPlan::default_icu();
    plan.effects.insert("not_a_column".into(), 1.0);
    assert!(generate_cohort(&SynthConfig { n: 100, signal: plan, ..Default::default() }).is_err());
    let mut plan = SignalPlan::default_icu();
    plan.label_noise.insert("Race:Martian".into(), 0.5);
    assert!(generate_cohort(&SynthConfig { n: 100, signal: plan, ..Default::default() }).is_err());
    let mut cfg = SynthConfig { n: 100, ..Default::default() };
    cfg.prevalence.white = 1.0;
    assert!(matches!(generate_cohort(&cfg), Err(SynthError::InfeasibleConfig(_))));
}
