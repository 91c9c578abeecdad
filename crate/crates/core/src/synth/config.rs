use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::SynthError;
use crate::cohort::{FeatureSchema, Race, SubgroupKey};

/// One value per race, including `Unknown`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerRace<T> {
    #[serde(rename = "Black")]
    pub black: T,
    #[serde(rename = "Asian")]
    pub asian: T,
    #[serde(rename = "Hispanic")]
    pub hispanic: T,
    #[serde(rename = "White")]
    pub white: T,
    #[serde(rename = "Unknown")]
    pub unknown: T,
}

impl<T> PerRace<T> {
    pub fn get(&self, race: Race) -> &T {
        match race {
            Race::Black => &self.black,
            Race::Asian => &self.asian,
            Race::Hispanic => &self.hispanic,
            Race::White => &self.white,
            Race::Unknown => &self.unknown,
        }
    }

    pub fn get_mut(&mut self, race: Race) -> &mut T {
        match race {
            Race::Black => &mut self.black,
            Race::Asian => &mut self.asian,
            Race::Hispanic => &mut self.hispanic,
            Race::White => &mut self.white,
            Race::Unknown => &mut self.unknown,
        }
    }

    fn map<U>(counts: [T; 5], f: impl Fn(T) -> U) -> PerRace<U> {
        let [black, asian, hispanic, white, unknown] = counts;
        PerRace { black: f(black), asian: f(asian), hispanic: f(hispanic), white: f(white), unknown: f(unknown) }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AgeTarget {
    pub median: f64,
    pub iqr: f64,
}

/// Log-odds shifts of the SDOH attributes on label selection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SdohEffects {
    /// Per decade of age above 65.
    pub age_per_decade: f64,
    pub female: f64,
    /// Government, Medicare, Medicaid, Private, SelfPay.
    pub insurance: [f64; 5],
}

impl Default for SdohEffects {
    fn default() -> Self {
        SdohEffects { age_per_decade: 0.0, female: 0.0, insurance: [0.0; 5] }
    }
}

impl SdohEffects {
    pub fn is_zero(&self) -> bool {
        self.age_per_decade == 0.0 && self.female == 0.0 && self.insurance.iter().all(|&v| v == 0.0)
    }
}

/// Where label signal lives.
///
/// Clinical feature `j` is drawn as `z ~ N(effects[j] * y, 1)` on a
/// standardized scale, so with numeric features only the Bayes-optimal
/// AUC is `Phi(|effects| / sqrt(2))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SignalPlan {
    pub effects: BTreeMap<String, f64>,
    /// Replaces `effects` entirely for the named race.
    pub race_effects: BTreeMap<String, BTreeMap<String, f64>>,
    pub sdoh: SdohEffects,
    /// Per-subgroup probability (keys like `Race:Black`) that a label is
    /// redrawn from the subgroup prevalence after features are generated.
    pub label_noise: BTreeMap<String, f64>,
    /// Per-column probability of a missing value.
    pub missing_rate: BTreeMap<String, f64>,
}

/// Tables left out of a config keep their `default_icu` values.
impl Default for SignalPlan {
    fn default() -> Self {
        SignalPlan::default_icu()
    }
}

impl SignalPlan {
    /// A lab-dominant plan with a small SDOH contribution.
    pub fn default_icu() -> Self {
        let effects = [
            ("day1_chloride_max", 0.612),
            ("total_chloride_load", 0.34),
            ("sodium_max", 0.34),
            ("bicarbonate_min", -0.272),
            ("max_chloride_input", 0.187),
            ("net_fluid_balance", 0.187),
            ("creatinine_max", 0.119),
            ("bun_max", 0.119),
            ("renal_failure", 0.153),
            ("sodium_bicarbonate", 0.153),
            ("diuretics", -0.153),
        ];
        SignalPlan {
            effects: effects.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
            sdoh: SdohEffects { age_per_decade: 0.21, female: 0.21, insurance: [0.35, 0.0, 0.28, -0.14, 0.28] },
            ..SignalPlan::null()
        }
    }

    /// No signal anywhere: labels are independent of every feature.
    pub fn null() -> Self {
        SignalPlan {
            effects: BTreeMap::new(),
            race_effects: BTreeMap::new(),
            sdoh: SdohEffects::default(),
            label_noise: BTreeMap::new(),
            missing_rate: BTreeMap::new(),
        }
    }

    pub fn effects_for(&self, race: Race) -> &BTreeMap<String, f64> {
        self.race_effects.get(race.as_str()).unwrap_or(&self.effects)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    /// Eligible records generated.
    pub n: usize,
    pub seed: u64,
    pub race_mix: PerRace<f64>,
    pub female: PerRace<f64>,
    pub age: PerRace<AgeTarget>,
    /// Government, Medicare, Medicaid, Private, SelfPay.
    pub insurance: PerRace<[f64; 5]>,
    pub prevalence: PerRace<f64>,
    pub signal: SignalPlan,
    /// Extra ineligible records, as a fraction of `n`, that the exclusion
    /// rules remove again.
    pub exclusion_fraction: f64,
    pub first_stay_id: u64,
}

const RACE_N: [f64; 5] = [3283.0, 688.0, 1180.0, 23910.0, 4269.0];
const TOTAL_N: f64 = 33330.0;

impl Default for SynthConfig {
    fn default() -> Self {
        let ins = |c: [f64; 5]| {
            let n: f64 = c.iter().sum();
            c.map(|v| v / n)
        };
        SynthConfig {
            n: 33330,
            seed: 0,
            race_mix: PerRace::map(RACE_N, |c| c / TOTAL_N),
            female: PerRace::map([1792.0 / 3283.0, 285.0 / 688.0, 430.0 / 1180.0, 10109.0 / 23910.0, 1661.0 / 4269.0], |v| v),
            age: PerRace::map([(59.4, 23.9), (64.4, 26.5), (52.8, 24.1), (66.9, 24.6), (65.5, 25.1)], |(median, iqr)| {
                AgeTarget { median, iqr }
            }),
            insurance: PerRace {
                black: ins([122.0, 1790.0, 488.0, 848.0, 35.0]),
                asian: ins([30.0, 346.0, 119.0, 189.0, 4.0]),
                hispanic: ins([99.0, 505.0, 223.0, 321.0, 32.0]),
                white: ins([525.0, 13612.0, 1770.0, 7793.0, 209.0]),
                unknown: ins([141.0, 2306.0, 358.0, 1373.0, 91.0]),
            },
            prevalence: PerRace::map([175.0 / 3283.0, 63.0 / 688.0, 80.0 / 1180.0, 1382.0 / 23910.0, 292.0 / 4269.0], |v| v),
            signal: SignalPlan::default_icu(),
            exclusion_fraction: 0.0,
            first_stay_id: 200_000,
        }
    }
}

impl SynthConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, SynthError> {
        let cfg: SynthConfig = toml::from_str(text).map_err(|e| SynthError::InvalidConfig(e.to_string()))?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Hex SHA-256 of the canonical JSON form of the config.
    pub fn config_hash(&self) -> String {
        let text = serde_json::to_string(self).expect("config serializes");
        hex::encode(Sha256::digest(text.as_bytes()))
    }

    pub fn validate(&self, schema: &FeatureSchema) -> Result<(), SynthError> {
        let bad = |msg: String| Err(SynthError::InvalidConfig(msg));
        if self.n == 0 {
            return bad("n must be positive".into());
        }
        let mix: f64 = Race::ALL.iter().map(|&r| *self.race_mix.get(r)).sum();
        if (mix - 1.0).abs() > 1e-9 || Race::ALL.iter().any(|&r| !(*self.race_mix.get(r) >= 0.0)) {
            return bad(format!("race_mix sums to {mix}, expected 1"));
        }
        for &race in Race::ALL {
            let ins = self.insurance.get(race);
            let total: f64 = ins.iter().sum();
            if (total - 1.0).abs() > 1e-9 || ins.iter().any(|v| !(*v >= 0.0)) {
                return bad(format!("insurance mix for {race} sums to {total}, expected 1"));
            }
            let f = *self.female.get(race);
            if !(0.0..=1.0).contains(&f) {
                return bad(format!("female fraction for {race} is {f}"));
            }
            let p = *self.prevalence.get(race);
            if !(p > 0.0 && p < 1.0) {
                return Err(SynthError::InfeasibleConfig(format!("prevalence for {race} is {p}; need 0 < p < 1")));
            }
            let age = self.age.get(race);
            if !(age.median.is_finite() && age.iqr >= 0.0) {
                return bad(format!("age target for {race} is invalid"));
            }
        }
        if !(self.exclusion_fraction >= 0.0 && self.exclusion_fraction.is_finite()) {
            return bad(format!("exclusion_fraction {}", self.exclusion_fraction));
        }
        let plan = &self.signal;
        let check_effects = |effects: &BTreeMap<String, f64>| -> Result<(), SynthError> {
            for (name, v) in effects {
                let ok = schema.index_of(name).is_some() && !matches!(name.as_str(), "age" | "gender" | "race" | "insurance");
                if !ok {
                    return Err(SynthError::InvalidConfig(format!("effect on unknown or SDOH column `{name}`")));
                }
                if !v.is_finite() {
                    return Err(SynthError::InvalidConfig(format!("effect on `{name}` is not finite")));
                }
            }
            Ok(())
        };
        check_effects(&plan.effects)?;
        for (race, effects) in &plan.race_effects {
            if race.parse::<Race>().is_err() {
                return bad(format!("race_effects names unknown race `{race}`"));
            }
            check_effects(effects)?;
        }
        for (key, rho) in &plan.label_noise {
            if key.parse::<SubgroupKey>().is_err() {
                return bad(format!("label_noise names unknown subgroup `{key}`"));
            }
            if !(0.0..=1.0).contains(rho) {
                return bad(format!("label noise {rho} for {key} is outside [0, 1]"));
            }
        }
        for (name, rate) in &plan.missing_rate {
            let extra = schema.index_of(name).and_then(|c| schema.extra_slot(c));
            if extra.is_none() {
                return bad(format!("missing_rate names `{name}`, which is not an optional feature column"));
            }
            if !(0.0..1.0).contains(rate) {
                return bad(format!("missing rate {rate} for {name} is outside [0, 1)"));
            }
        }
        let s = &plan.sdoh;
        if !(s.age_per_decade.is_finite() && s.female.is_finite() && s.insurance.iter().all(|v| v.is_finite())) {
            return bad("sdoh effects must be finite".into());
        }
        Ok(())
    }
}
