use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::record::{Cohort, Gender, Insurance, Race, HYPERCHLOREMIA_THRESHOLD};
use super::CohortError;
use crate::rng::{stream_rng, Stream};

/// Minimum age (years) for inclusion.
pub const ADULT_AGE: f64 = 18.0;

/// Per-rule exclusion counts. Each record is charged to the first rule it fails.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExclusionReport {
    pub input: usize,
    pub under_age: usize,
    pub readmission: usize,
    pub missing_day1_chloride: usize,
    pub already_hyperchloremic: usize,
    pub retained: usize,
}

/// Keeps adult first admissions with a day-one chloride below the
/// hyperchloremia threshold.
pub fn apply_exclusions(cohort: &Cohort) -> (Cohort, ExclusionReport) {
    let mut report = ExclusionReport { input: cohort.len(), ..Default::default() };
    let mut kept = Vec::new();
    for r in cohort.records() {
        if r.age < ADULT_AGE {
            report.under_age += 1;
        } else if !r.is_first_admission {
            report.readmission += 1;
        } else if let Some(day1) = r.day1_chloride_max {
            if day1 >= HYPERCHLOREMIA_THRESHOLD {
                report.already_hyperchloremic += 1;
            } else {
                kept.push(r.clone());
            }
        } else {
            report.missing_day1_chloride += 1;
        }
    }
    report.retained = kept.len();
    (cohort.with_records(kept), report)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitIndex {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
    pub seed: u64,
}

/// Seeded random split: a uniform permutation whose first `floor(ratio * n)`
/// entries form the training set. Both lists are returned sorted.
pub fn split_train_test(cohort: &Cohort, ratio: f64, seed: u64) -> Result<SplitIndex, CohortError> {
    split_count(cohort.len(), ratio, seed)
}

pub(crate) fn split_count(n: usize, ratio: f64, seed: u64) -> Result<SplitIndex, CohortError> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(CohortError::InvalidRatio(ratio));
    }
    if n == 0 {
        return Err(CohortError::EmptyCohort);
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut stream_rng(seed, Stream::Split, 0));
    // guard against 0.7 * n landing a hair below an integer
    let n_train = ((ratio * n as f64) + 1e-9).floor() as usize;
    let mut train = order[..n_train].to_vec();
    let mut test = order[n_train..].to_vec();
    train.sort_unstable();
    test.sort_unstable();
    Ok(SplitIndex { train, test, seed })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    Race,
    Gender,
    Insurance,
}

impl Axis {
    pub const ALL: [Axis; 3] = [Axis::Race, Axis::Gender, Axis::Insurance];
}

/// One audit subgroup. Ordering follows race, gender, insurance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum SubgroupKey {
    Race(Race),
    Gender(Gender),
    Insurance(Insurance),
}

impl SubgroupKey {
    pub fn axis(self) -> Axis {
        match self {
            SubgroupKey::Race(_) => Axis::Race,
            SubgroupKey::Gender(_) => Axis::Gender,
            SubgroupKey::Insurance(_) => Axis::Insurance,
        }
    }

    pub fn value(self) -> &'static str {
        match self {
            SubgroupKey::Race(r) => r.as_str(),
            SubgroupKey::Gender(g) => g.as_str(),
            SubgroupKey::Insurance(i) => i.as_str(),
        }
    }

    /// The 11 audit subgroups: 4 races, 2 genders, 5 insurance types.
    pub fn all() -> Vec<SubgroupKey> {
        Race::ALL
            .iter()
            .filter(|&&r| r != Race::Unknown)
            .map(|&r| SubgroupKey::Race(r))
            .chain(Gender::ALL.iter().map(|&g| SubgroupKey::Gender(g)))
            .chain(Insurance::ALL.iter().map(|&i| SubgroupKey::Insurance(i)))
            .collect()
    }

    pub fn contains(self, record: &super::PatientRecord) -> bool {
        match self {
            SubgroupKey::Race(r) => r != Race::Unknown && record.race == r,
            SubgroupKey::Gender(g) => record.gender == g,
            SubgroupKey::Insurance(i) => record.insurance == i,
        }
    }
}

impl fmt::Display for SubgroupKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}:{}", self.axis(), self.value())
    }
}

impl FromStr for SubgroupKey {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let (axis, value) = s.split_once(':').ok_or_else(|| format!("expected Axis:Value, got `{s}`"))?;
        let bad = || format!("unknown subgroup `{s}`");
        match axis {
            "Race" => match value.parse::<Race>() {
                Ok(Race::Unknown) | Err(_) => Err(bad()),
                Ok(r) => Ok(SubgroupKey::Race(r)),
            },
            "Gender" => value.parse().map(SubgroupKey::Gender).map_err(|_| bad()),
            "Insurance" => value.parse().map(SubgroupKey::Insurance).map_err(|_| bad()),
            _ => Err(bad()),
        }
    }
}

impl From<SubgroupKey> for String {
    fn from(k: SubgroupKey) -> String {
        k.to_string()
    }
}

impl TryFrom<String> for SubgroupKey {
    type Error = String;

    fn try_from(s: String) -> Result<Self, String> {
        s.parse()
    }
}

/// Splits `indices` by the categories of `axis`, preserving input order.
/// Unknown-race records belong to no race subgroup; empty subgroups are omitted.
pub fn subgroup_partition(cohort: &Cohort, indices: &[usize], axis: Axis) -> BTreeMap<SubgroupKey, Vec<usize>> {
    let mut out: BTreeMap<SubgroupKey, Vec<usize>> = BTreeMap::new();
    for &i in indices {
        let r = &cohort.records()[i];
        let key = match axis {
            Axis::Race if r.race == Race::Unknown => continue,
            Axis::Race => SubgroupKey::Race(r.race),
            Axis::Gender => SubgroupKey::Gender(r.gender),
            Axis::Insurance => SubgroupKey::Insurance(r.insurance),
        };
        out.entry(key).or_default().push(i);
    }
    out
}

/// Members of one subgroup among `indices`, in input order.
pub fn subgroup_members(cohort: &Cohort, indices: &[usize], key: SubgroupKey) -> Vec<usize> {
    indices.iter().copied().filter(|&i| key.contains(&cohort.records()[i])).collect()
}
