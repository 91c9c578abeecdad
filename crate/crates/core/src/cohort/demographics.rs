use serde::{Deserialize, Serialize};

use super::record::{Cohort, Gender, Insurance, Race};
use super::CohortError;

/// Summary statistics for one column of the demographics table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemographicsColumn {
    pub label: String,
    pub n: usize,
    pub female: usize,
    pub age_median: Option<f64>,
    pub age_iqr: Option<f64>,
    pub hyperchloremia: usize,
    /// Counts in `Insurance::ALL` order.
    pub insurance: Vec<usize>,
}

/// Demographics by race plus a total column (which includes Unknown race).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemographicsSummary {
    pub columns: Vec<DemographicsColumn>,
}

pub const TABLE1_HEADER: [&str; 6] = ["characteristic", "Black", "Asian", "Hispanic", "White", "Total"];

/// Linear-interpolation quantile of sorted data.
pub(crate) fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

fn summarize(cohort: &Cohort, label: &str, keep: impl Fn(Race) -> bool) -> Result<DemographicsColumn, CohortError> {
    let mut ages = Vec::new();
    let mut col = DemographicsColumn {
        label: label.to_string(),
        n: 0,
        female: 0,
        age_median: None,
        age_iqr: None,
        hyperchloremia: 0,
        insurance: vec![0; Insurance::ALL.len()],
    };
    for r in cohort.records().iter().filter(|r| keep(r.race)) {
        col.n += 1;
        col.female += (r.gender == Gender::Female) as usize;
        col.hyperchloremia += r.resolved_label()? as usize;
        col.insurance[r.insurance.index()] += 1;
        ages.push(r.age);
    }
    if !ages.is_empty() {
        ages.sort_by(f64::total_cmp);
        col.age_median = Some(quantile_sorted(&ages, 0.5));
        col.age_iqr = Some(quantile_sorted(&ages, 0.75) - quantile_sorted(&ages, 0.25));
    }
    Ok(col)
}

pub fn demographics_table(cohort: &Cohort) -> Result<DemographicsSummary, CohortError> {
    let mut columns = Vec::new();
    for &race in Race::ALL.iter().filter(|&&r| r != Race::Unknown) {
        columns.push(summarize(cohort, race.as_str(), |r| r == race)?);
    }
    columns.push(summarize(cohort, "Total", |_| true)?);
    Ok(DemographicsSummary { columns })
}

fn pct(k: usize, n: usize) -> String {
    if n == 0 {
        format!("{k} (NA)")
    } else {
        format!("{k} ({:.1})", 100.0 * k as f64 / n as f64)
    }
}

impl DemographicsSummary {
    pub fn column(&self, label: &str) -> Option<&DemographicsColumn> {
        self.columns.iter().find(|c| c.label == label)
    }

    /// Rows of the demographics table (without header), formatted as
    /// `n (pct)` cells with one decimal.
    pub fn rows(&self) -> Vec<Vec<String>> {
        let mut rows = Vec::new();
        let mut push = |name: &str, f: &dyn Fn(&DemographicsColumn) -> String| {
            let mut row = vec![name.to_string()];
            row.extend(self.columns.iter().map(f));
            rows.push(row);
        };
        push("N", &|c| c.n.to_string());
        push("Female, n(%)", &|c| pct(c.female, c.n));
        push("Age, median (IQR)", &|c| match (c.age_median, c.age_iqr) {
            (Some(m), Some(iqr)) => format!("{m:.1} ({iqr:.1})"),
            _ => "NA".to_string(),
        });
        push("Hyperchloremia, n(%)", &|c| pct(c.hyperchloremia, c.n));
        let names = ["Government-Insured", "Medicare", "Medicaid", "Private", "Self-Pay"];
        for (k, name) in names.iter().enumerate() {
            push(&format!("{name}, n(%)"), &|c| pct(c.insurance[k], c.n));
        }
        rows
    }
}
