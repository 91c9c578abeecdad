//! Seeded synthetic cohorts matching the published demographic marginals.
//!
//! Each race gets an exact record count and an exact number of positives.
//! Positives are chosen by weighted sampling with odds set by the SDOH
//! effects; clinical features are then drawn conditionally on the label
//! from the signal plan, which keeps the posterior logistic-linear.

mod config;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use statrs::distribution::{ContinuousCDF, Normal};
use thiserror::Error;

pub use config::{AgeTarget, PerRace, SdohEffects, SignalPlan, SynthConfig};

use crate::cohort::{
    Cohort, CohortError, ColumnKind, FeatureSchema, Gender, Insurance, PatientRecord, Race, SubgroupKey, Value,
    ADULT_AGE,
};
use crate::rng::{stream_rng, Rng, Stream};

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid synth config: {0}")]
    InvalidConfig(String),
    #[error("infeasible synth config: {0}")]
    InfeasibleConfig(String),
    #[error(transparent)]
    Cohort(#[from] CohortError),
}

enum Marginal {
    Numeric { mean: f64, sd: f64, lo: f64, hi: f64 },
    Binary { threshold: f64 },
    Categorical { levels: u32 },
}

fn numeric(mean: f64, sd: f64, lo: f64, hi: f64) -> Marginal {
    Marginal::Numeric { mean, sd, lo, hi }
}

fn binary(prevalence: f64) -> Marginal {
    let z = Normal::new(0.0, 1.0).expect("standard normal").inverse_cdf(1.0 - prevalence);
    Marginal::Binary { threshold: z }
}

/// Marginal of a clinical column when the label effect is zero.
fn marginal(name: &str, kind: ColumnKind, levels: usize) -> Marginal {
    match kind {
        ColumnKind::Categorical => return Marginal::Categorical { levels: levels as u32 },
        ColumnKind::Binary => {
            let p = match name {
                "chf" => 0.2,
                "renal_failure" => 0.15,
                "hypertension" => 0.45,
                "diabetes" => 0.3,
                "liver_disease" => 0.08,
                "neuro_disorder" => 0.1,
                "mechanical_ventilation" => 0.4,
                "dialysis" => 0.05,
                "vasopressors" => 0.25,
                "diuretics" => 0.35,
                "sodium_bicarbonate" => 0.1,
                _ => 0.2,
            };
            return binary(p);
        }
        ColumnKind::Numeric => {}
    }
    match name {
        "weight_kg" => numeric(82.0, 20.0, 30.0, 250.0),
        "day1_chloride_max" => numeric(103.5, 4.0, 80.0, 109.9),
        "net_fluid_balance" => numeric(1500.0, 2500.0, -15000.0, 20000.0),
        "total_chloride_load" => numeric(250.0, 120.0, 0.0, 2000.0),
        "max_chloride_input" => numeric(120.0, 60.0, 0.0, 1000.0),
        "sodium_max" => numeric(140.0, 4.0, 110.0, 170.0),
        "potassium_max" => numeric(4.5, 0.8, 2.0, 9.0),
        "bicarbonate_min" => numeric(22.0, 4.5, 5.0, 45.0),
        "bun_max" => numeric(28.0, 14.0, 1.0, 200.0),
        "creatinine_max" => numeric(1.5, 0.6, 0.1, 15.0),
        "glucose_max" => numeric(170.0, 60.0, 20.0, 1000.0),
        "hemoglobin_min" => numeric(10.0, 2.0, 3.0, 20.0),
        "wbc_max" => numeric(12.0, 5.0, 0.1, 100.0),
        "lactate_max" => numeric(2.5, 1.0, 0.1, 25.0),
        "anion_gap_max" => numeric(15.0, 4.0, 0.0, 40.0),
        "heart_rate_max" => numeric(105.0, 20.0, 30.0, 250.0),
        "sbp_min" => numeric(90.0, 15.0, 30.0, 220.0),
        "temperature_max" => numeric(37.6, 0.7, 32.0, 43.0),
        "gcs_min" => numeric(12.0, 2.5, 3.0, 15.0),
        _ => numeric(0.0, 1.0, f64::NEG_INFINITY, f64::INFINITY),
    }
}

fn round_to(x: f64, decimals: i32) -> f64 {
    let k = 10f64.powi(decimals);
    (x * k).round() / k
}

/// Largest-remainder apportionment of `n` over `shares` (ties to the earlier share).
fn apportion(n: usize, shares: &[f64]) -> Vec<usize> {
    let raw: Vec<f64> = shares.iter().map(|s| s * n as f64).collect();
    let mut counts: Vec<usize> = raw.iter().map(|r| r.floor() as usize).collect();
    let mut order: Vec<usize> = (0..shares.len()).collect();
    order.sort_by(|&a, &b| (raw[b] - raw[b].floor()).total_cmp(&(raw[a] - raw[a].floor())).then(a.cmp(&b)));
    let short = n.saturating_sub(counts.iter().sum());
    for &i in order.iter().take(short) {
        counts[i] += 1;
    }
    counts
}

struct Plan<'a> {
    config: &'a SynthConfig,
    schema: &'a FeatureSchema,
    /// (schema column, marginal) for every generated clinical column.
    columns: Vec<(usize, Marginal)>,
    noise: Vec<(SubgroupKey, f64)>,
}

enum Labels {
    Exact(usize),
    Bernoulli,
}

impl Plan<'_> {
    fn demographics(&self, race: Race, rng: &mut Rng) -> (f64, Gender, Insurance) {
        let cfg = self.config;
        let target = cfg.age.get(race);
        let z: f64 = rng.sample(StandardNormal);
        let age = round_to((target.median + z * target.iqr / 1.349).clamp(ADULT_AGE, 100.0), 1);
        let gender = if rng.random::<f64>() < *cfg.female.get(race) { Gender::Female } else { Gender::Male };
        let weights = WeightedIndex::new(cfg.insurance.get(race)).expect("validated insurance mix");
        (age, gender, Insurance::ALL[weights.sample(rng)])
    }

    fn sdoh_logit(&self, age: f64, gender: Gender, insurance: Insurance) -> f64 {
        let s = &self.config.signal.sdoh;
        s.age_per_decade * (age - 65.0) / 10.0
            + if gender == Gender::Female { s.female } else { 0.0 }
            + s.insurance[insurance.index()]
    }

    fn batch(&self, race: Race, n: usize, labels: Labels, rng: &mut Rng) -> Vec<PatientRecord> {
        let demo: Vec<(f64, Gender, Insurance)> = (0..n).map(|_| self.demographics(race, rng)).collect();
        let prevalence = *self.config.prevalence.get(race);
        let mut y = vec![false; n];
        match labels {
            Labels::Exact(k) => {
                // Efraimidis-Spirakis: the k largest ln(u) / w form a weighted sample without replacement
                let mut keys: Vec<(f64, usize)> = demo
                    .iter()
                    .enumerate()
                    .map(|(i, &(a, g, ins))| {
                        let u: f64 = rng.random::<f64>().max(f64::MIN_POSITIVE);
                        (u.ln() * (-self.sdoh_logit(a, g, ins)).exp(), i)
                    })
                    .collect();
                keys.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
                for &(_, i) in keys.iter().take(k) {
                    y[i] = true;
                }
            }
            Labels::Bernoulli => {
                for v in y.iter_mut() {
                    *v = rng.random::<f64>() < prevalence;
                }
            }
        }
        let effects = self.config.signal.effects_for(race);
        let missing = &self.config.signal.missing_rate;
        let n_extra = self.schema.extra_columns().count();
        let mut out = Vec::with_capacity(n);
        for (i, &(age, gender, insurance)) in demo.iter().enumerate() {
            let label = y[i];
            let mut features = vec![None; n_extra];
            let mut day1 = None;
            for (col, m) in &self.columns {
                let spec = &self.schema.columns()[*col];
                let beta = effects.get(&spec.name).copied().unwrap_or(0.0);
                let z = rng.sample::<f64, _>(StandardNormal) + if label { beta } else { 0.0 };
                let value = match *m {
                    Marginal::Numeric { mean, sd, lo, hi } => {
                        let digits = if spec.name == "day1_chloride_max" { 1 } else { 3 };
                        Value::Number(round_to((mean + sd * z).clamp(lo, hi), digits))
                    }
                    Marginal::Binary { threshold } => Value::Number(if z > threshold { 1.0 } else { 0.0 }),
                    Marginal::Categorical { levels } => Value::Level(rng.random_range(0..levels)),
                };
                match self.schema.extra_slot(*col) {
                    Some(slot) => {
                        let rate = missing.get(&spec.name).copied().unwrap_or(0.0);
                        if rate == 0.0 || rng.random::<f64>() >= rate {
                            features[slot] = Some(value);
                        }
                    }
                    None => {
                        if let Value::Number(v) = value {
                            day1 = Some(v);
                        }
                    }
                }
            }
            out.push(PatientRecord {
                stay_id: 0,
                age,
                gender,
                race,
                insurance,
                is_first_admission: true,
                day1_chloride_max: day1,
                day2_chloride_max: None,
                features,
                label: Some(label),
            });
        }
        for r in out.iter_mut() {
            for (key, rho) in &self.noise {
                if key.contains(r) && rng.random::<f64>() < *rho {
                    r.label = Some(rng.random::<f64>() < prevalence);
                }
            }
            let base = r.day1_chloride_max.unwrap_or(103.5);
            let z: f64 = rng.sample(StandardNormal);
            r.day2_chloride_max = Some(if r.label == Some(true) {
                round_to(110.0 + 2.5 * z.abs(), 1)
            } else {
                round_to((base + 2.0 * z).min(109.9), 1)
            });
        }
        out
    }
}

/// Synthetic cohort over the default 34-column schema.
pub fn generate_cohort(config: &SynthConfig) -> Result<Cohort, SynthError> {
    generate_cohort_with_schema(config, FeatureSchema::default_icu())
}

pub fn generate_cohort_with_schema(config: &SynthConfig, schema: FeatureSchema) -> Result<Cohort, SynthError> {
    config.validate(&schema)?;
    let columns = schema
        .columns()
        .iter()
        .enumerate()
        .filter(|(_, c)| !matches!(c.name.as_str(), "age" | "gender" | "race" | "insurance"))
        .map(|(i, c)| (i, marginal(&c.name, c.kind, c.categories.len())))
        .collect();
    let noise = config
        .signal
        .label_noise
        .iter()
        .map(|(k, rho)| (k.parse::<SubgroupKey>().expect("validated key"), *rho))
        .collect();
    let plan = Plan { config, schema: &schema, columns, noise };

    let shares: Vec<f64> = Race::ALL.iter().map(|&r| *config.race_mix.get(r)).collect();
    let counts = apportion(config.n, &shares);
    let mut records: Vec<PatientRecord> = Race::ALL
        .par_iter()
        .zip(counts.par_iter())
        .flat_map_iter(|(&race, &n)| {
            let k = (config.prevalence.get(race) * n as f64).round() as usize;
            let mut rng = stream_rng(config.seed, Stream::Synth, race.index() as u64);
            plan.batch(race, n, Labels::Exact(k), &mut rng)
        })
        .collect();

    let n_ineligible = (config.exclusion_fraction * config.n as f64).round() as usize;
    if n_ineligible > 0 {
        let mut rng = stream_rng(config.seed, Stream::Synth, 100);
        let pick = WeightedIndex::new(&shares).expect("validated race mix");
        for i in 0..n_ineligible {
            let race = Race::ALL[pick.sample(&mut rng)];
            let mut r = plan.batch(race, 1, Labels::Bernoulli, &mut rng).pop().expect("one record");
            match i % 4 {
                0 => r.age = rng.random_range(1..18) as f64,
                1 => r.is_first_admission = false,
                2 => r.day1_chloride_max = None,
                _ => r.day1_chloride_max = Some(round_to(110.0 + 3.0 * rng.sample::<f64, _>(StandardNormal).abs(), 1)),
            }
            records.push(r);
        }
    }

    records.shuffle(&mut stream_rng(config.seed, Stream::Synth, 200));
    for (i, r) in records.iter_mut().enumerate() {
        r.stay_id = config.first_stay_id + i as u64;
    }
    Ok(Cohort::new(schema, records, format!("synthetic (seed {})", config.seed))?)
}
