use fairaudit::cohort::*;
use fairaudit::synth::{generate_cohort, SignalPlan, SynthConfig};
use proptest::prelude::*;

fn round_trip(cohort: &Cohort) -> Cohort {
    let mut bytes = Vec::new();
    write_cohort(cohort, &mut bytes).unwrap();
    ingest_cohort(bytes.as_slice(), cohort.schema().clone()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn csv_round_trip_preserves_records(seed in any::<u64>(), n in 1usize..300, missing in 0.0f64..0.9, excl in 0.0f64..0.5) {
        let mut plan = SignalPlan::default_icu();
        plan.missing_rate.insert("glucose_max".into(), missing);
        plan.missing_rate.insert("chf".into(), missing / 2.0);
        let cfg = SynthConfig { n, seed, signal: plan, exclusion_fraction: excl, ..Default::default() };
        let cohort = generate_cohort(&cfg).unwrap();
        let back = round_trip(&cohort);
        prop_assert_eq!(back.records(), cohort.records());
        for r in back.records() {
            if let Some(l) = r.label {
                prop_assert_eq!(derive_label(r).unwrap(), l);
            }
        }
    }

    #[test]
    fn split_partitions_every_record(n in 2usize..500, ratio in 0.05f64..0.95, seed in any::<u64>()) {
        let cohort = generate_cohort(&SynthConfig { n, seed: 1, ..Default::default() }).unwrap();
        let split = split_train_test(&cohort, ratio, seed).unwrap();
        let mut all: Vec<usize> = split.train.iter().chain(&split.test).copied().collect();
        all.sort_unstable();
        prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
        prop_assert_eq!(split.train.len(), (ratio * n as f64 + 1e-9).floor() as usize);
    }
}

#[test]
fn label_rule_uses_day_two_threshold() {
    let cohort = generate_cohort(&SynthConfig { n: 50, seed: 3, ..Default::default() }).unwrap();
    let mut r = cohort.records()[0].clone();
    r.label = None;
    r.day2_chloride_max = Some(HYPERCHLOREMIA_THRESHOLD);
    assert!(derive_label(&r).unwrap());
    r.day2_chloride_max = Some(HYPERCHLOREMIA_THRESHOLD - 0.1);
    assert!(!derive_label(&r).unwrap());
    r.day2_chloride_max = None;
    assert!(derive_label(&r).is_err());
}

#[test]
fn default_schema_shape() {
    let s = FeatureSchema::default_icu();
    assert_eq!(s.feature_set_columns(FeatureSet::Full).len(), 34);
    assert_eq!(s.feature_set_columns(FeatureSet::Sdoh).len(), 4);
    assert_eq!(s.feature_set_columns(FeatureSet::Labs).len(), 30);
    let back = FeatureSchema::from_toml_str(&s.to_toml_string()).unwrap();
    assert_eq!(back, s);
}

#[test]
fn ingest_rejects_missing_columns_and_bad_levels() {
    let cohort = generate_cohort(&SynthConfig { n: 20, seed: 4, ..Default::default() }).unwrap();
    let mut bytes = Vec::new();
    write_cohort(&cohort, &mut bytes).unwrap();
    let text = String::from_utf8(bytes).unwrap();
    let header = text.lines().next().unwrap();
    let without: String = text.replacen(header, &header.replace(",sodium_max", ",sodium"), 1);
    assert!(ingest_cohort(without.as_bytes(), FeatureSchema::default_icu()).is_err());
    let bad_race = text.replacen(",White,", ",Martian,", 1);
    if bad_race != text {
        assert!(ingest_cohort(bad_race.as_bytes(), FeatureSchema::default_icu()).is_err());
    }
}

#[test]
fn duplicate_stay_ids_are_rejected() {
    let cohort = generate_cohort(&SynthConfig { n: 5, seed: 5, ..Default::default() }).unwrap();
    let mut records = cohort.records().to_vec();
    records[1].stay_id = records[0].stay_id;
    assert!(Cohort::new(cohort.schema().clone(), records, "test").is_err());
}

#[test]
fn exclusions_count_each_rule() {
    let cohort = generate_cohort(&SynthConfig { n: 1000, seed: 6, exclusion_fraction: 0.3, ..Default::default() }).unwrap();
    let (kept, report) = apply_exclusions(&cohort);
    assert_eq!(report.input, 1300);
    assert_eq!(
        report.under_age + report.readmission + report.missing_day1_chloride + report.already_hyperchloremic,
        300
    );
    assert!(kept.records().iter().all(|r| r.age >= ADULT_AGE && r.is_first_admission));
}

#[test]
fn subgroups_cover_each_axis_except_unknown_race() {
    let cohort = generate_cohort(&SynthConfig { n: 800, seed: 7, ..Default::default() }).unwrap();
    let idx: Vec<usize> = (0..cohort.len()).collect();
    for axis in Axis::ALL {
        let keys: Vec<SubgroupKey> = SubgroupKey::all().into_iter().filter(|k| k.axis() == axis).collect();
        let total: usize = keys.iter().map(|&k| subgroup_members(&cohort, &idx, k).len()).sum();
        let expected = match axis {
            Axis::Race => cohort.records().iter().filter(|r| r.race != Race::Unknown).count(),
            _ => cohort.len(),
        };
        assert_eq!(total, expected, "{axis:?}");
    }
}

#[test]
fn encoder_one_hot_layout() {
    let cohort = generate_cohort(&SynthConfig { n: 300, seed: 8, ..Default::default() }).unwrap();
    let idx: Vec<usize> = (0..cohort.len()).collect();
    let full = FeatureEncoder::fit(&cohort, &idx, FeatureSet::Full, Encoding::FullOneHot);
    let dropped = FeatureEncoder::fit(&cohort, &idx, FeatureSet::Full, Encoding::DropReference);
    // gender 2, race 5, insurance 5 levels
    assert_eq!(full.n_columns() - dropped.n_columns(), 3);
    assert_eq!(full.groups().len(), 34);
    let x = full.transform_x(&cohort, &idx).unwrap();
    for g in full.groups().iter().filter(|g| g.len() > 1) {
        for r in 0..x.rows() {
            let hot: f64 = g.clone().map(|c| x.get(r, c)).sum();
            assert_eq!(hot, 1.0);
        }
    }
}
