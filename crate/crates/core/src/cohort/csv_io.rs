//! Cohort CSV reading and writing.
//!
//! The file is UTF-8, comma separated, with a mandatory header. The header
//! holds the identity columns followed by the schema's remaining feature
//! columns; columns may appear in any order on input and are written in
//! canonical order. An empty cell is a missing value. Categories are
//! case-sensitive.

use std::collections::HashMap;
use std::io::{Read, Write};

use super::record::{Cohort, Gender, Insurance, PatientRecord, Race, Value};
use super::schema::{ColumnKind, FeatureSchema, IDENTITY_COLUMNS};
use super::CohortError;

pub fn ingest_cohort<R: Read>(source: R, schema: FeatureSchema) -> Result<Cohort, CohortError> {
    ingest_cohort_tagged(source, schema, "csv")
}

pub fn ingest_cohort_tagged<R: Read>(
    source: R,
    schema: FeatureSchema,
    provenance: &str,
) -> Result<Cohort, CohortError> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).flexible(true).from_reader(source);
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| CohortError::Csv(e.to_string()))?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();

    let expected = schema.csv_header();
    let mut position: HashMap<&str, usize> = HashMap::new();
    for (i, h) in header.iter().enumerate() {
        if position.insert(h.as_str(), i).is_some() {
            return Err(CohortError::HeaderMismatch(format!("column `{h}` repeated")));
        }
    }
    for name in &expected {
        if !position.contains_key(name.as_str()) {
            return Err(CohortError::HeaderMismatch(format!("missing column `{name}`")));
        }
    }
    if header.len() != expected.len() {
        let extra: Vec<&String> = header.iter().filter(|h| !expected.contains(h)).collect();
        return Err(CohortError::HeaderMismatch(format!("unexpected columns {extra:?}")));
    }
    let col = |name: &str| position[name];

    let extras: Vec<(usize, usize)> =
        schema.extra_columns().map(|(ci, c)| (ci, col(&c.name))).collect();

    let mut records = Vec::new();
    for (row_no, row) in reader.records().enumerate() {
        // header is line 1
        let line = row_no + 2;
        let row = row.map_err(|e| CohortError::Csv(e.to_string()))?;
        if row.len() != header.len() {
            return Err(CohortError::MalformedRow { line, expected: header.len(), found: row.len() });
        }
        let cell = |name: &str| row.get(col(name)).unwrap().trim();

        let required = |name: &str| -> Result<&str, CohortError> {
            let v = cell(name);
            if v.is_empty() {
                Err(CohortError::MissingField { line, column: name.to_string() })
            } else {
                Ok(v)
            }
        };
        let number = |name: &str, text: &str| -> Result<f64, CohortError> {
            text.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| CohortError::InvalidNumber { line, column: name.to_string(), value: text.to_string() })
        };
        let optional_number = |name: &str| -> Result<Option<f64>, CohortError> {
            let v = cell(name);
            if v.is_empty() {
                Ok(None)
            } else {
                number(name, v).map(Some)
            }
        };
        let category = |name: &str, text: &str| CohortError::UnknownCategory {
            line,
            column: name.to_string(),
            value: text.to_string(),
        };

        let stay_text = required("stay_id")?;
        let stay_id = stay_text.parse::<u64>().map_err(|_| CohortError::InvalidNumber {
            line,
            column: "stay_id".into(),
            value: stay_text.to_string(),
        })?;
        let age = number("age", required("age")?)?;
        if age < 0.0 {
            return Err(CohortError::InvalidNumber { line, column: "age".into(), value: age.to_string() });
        }
        let g = required("gender")?;
        let gender: Gender = g.parse().map_err(|_| category("gender", g))?;
        let r = required("race")?;
        let race: Race = r.parse().map_err(|_| category("race", r))?;
        let ins = required("insurance")?;
        let insurance: Insurance = ins.parse().map_err(|_| category("insurance", ins))?;
        let first = required("is_first_admission")?;
        let is_first_admission = parse_flag(first)
            .ok_or_else(|| CohortError::InvalidNumber { line, column: "is_first_admission".into(), value: first.into() })?;
        let day1_chloride_max = optional_number("day1_chloride_max")?;
        let day2_chloride_max = optional_number("day2_chloride_max")?;

        let mut features = Vec::with_capacity(extras.len());
        for &(ci, pos) in &extras {
            let spec = &schema.columns()[ci];
            let text = row.get(pos).unwrap().trim();
            if text.is_empty() {
                features.push(None);
                continue;
            }
            let v = match spec.kind {
                ColumnKind::Numeric => Value::Number(number(&spec.name, text)?),
                ColumnKind::Binary => Value::Number(
                    parse_flag(text)
                        .ok_or_else(|| CohortError::InvalidNumber {
                            line,
                            column: spec.name.clone(),
                            value: text.to_string(),
                        })? as u8 as f64,
                ),
                ColumnKind::Categorical => {
                    let level = spec
                        .categories
                        .iter()
                        .position(|c| c == text)
                        .ok_or_else(|| category(&spec.name, text))?;
                    Value::Level(level as u32)
                }
            };
            features.push(Some(v));
        }

        let mut record = PatientRecord {
            stay_id,
            age,
            gender,
            race,
            insurance,
            is_first_admission,
            day1_chloride_max,
            day2_chloride_max,
            features,
            label: None,
        };
        record.label = super::derive_label(&record).ok();
        records.push(record);
    }
    Cohort::new(schema, records, provenance)
}

fn parse_flag(text: &str) -> Option<bool> {
    match text {
        "1" | "true" | "True" | "TRUE" => Some(true),
        "0" | "false" | "False" | "FALSE" => Some(false),
        _ => None,
    }
}

/// Writes `cohort` in canonical column order. Numbers use the shortest
/// representation that parses back to the same value.
pub fn write_cohort<W: Write>(cohort: &Cohort, sink: W) -> Result<(), CohortError> {
    let schema = cohort.schema();
    let mut writer = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(sink);
    let io = |e: csv::Error| CohortError::Csv(e.to_string());
    writer.write_record(schema.csv_header()).map_err(io)?;
    let extras: Vec<usize> = schema.extra_columns().map(|(ci, _)| ci).collect();
    let mut row: Vec<String> = Vec::with_capacity(IDENTITY_COLUMNS.len() + extras.len());
    for r in cohort.records() {
        row.clear();
        row.push(r.stay_id.to_string());
        row.push(fmt_num(r.age));
        row.push(r.gender.as_str().into());
        row.push(r.race.as_str().into());
        row.push(r.insurance.as_str().into());
        row.push(if r.is_first_admission { "1" } else { "0" }.into());
        row.push(r.day1_chloride_max.map(fmt_num).unwrap_or_default());
        row.push(r.day2_chloride_max.map(fmt_num).unwrap_or_default());
        for (&ci, v) in extras.iter().zip(&r.features) {
            let spec = &schema.columns()[ci];
            row.push(match v {
                None => String::new(),
                Some(Value::Number(x)) if spec.kind == ColumnKind::Binary => {
                    if *x != 0.0 { "1" } else { "0" }.into()
                }
                Some(Value::Number(x)) => fmt_num(*x),
                Some(Value::Level(l)) => spec.categories[*l as usize].clone(),
            });
        }
        writer.write_record(&row).map_err(io)?;
    }
    writer.flush().map_err(|e| CohortError::Csv(e.to_string()))?;
    Ok(())
}

fn fmt_num(v: f64) -> String {
    format!("{v}")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_schema() -> FeatureSchema {
        FeatureSchema::from_toml_str(
            r#"
version = 1
[[columns]]
name = "age"
kind = "numeric"
role = "sdoh"
[[columns]]
name = "race"
kind = "categorical"
role = "sdoh"
[[columns]]
name = "sodium_max"
kind = "numeric"
role = "lab"
units = "mEq/L"
[[columns]]
name = "ventilated"
kind = "binary"
role = "intervention"
[[columns]]
name = "unit"
kind = "categorical"
role = "lab"
categories = ["MICU", "SICU"]
"#,
        )
        .unwrap()
    }

    const HEADER: &str = "stay_id,age,gender,race,insurance,is_first_admission,day1_chloride_max,day2_chloride_max,sodium_max,ventilated,unit";

    #[test]
    fn ingests_well_formed_rows() {
        let text = format!(
            "{HEADER}\n1,64,Female,White,Medicare,1,104,111,140.5,1,MICU\n2,30.5,Male,Black,Private,0,,99,,0,SICU\n3,70,Male,Unknown,SelfPay,1,108,,139,,\n"
        );
        let c = ingest_cohort(text.as_bytes(), tiny_schema()).unwrap();
        assert_eq!(c.len(), 3);
        let r = &c.records()[1];
        assert_eq!(r.day1_chloride_max, None);
        assert_eq!(r.label, Some(false));
        assert_eq!(c.records()[0].label, Some(true));
        assert_eq!(c.records()[2].label, None);
        assert_eq!(c.records()[2].features, vec![Some(Value::Number(139.0)), None, None]);
        assert_eq!(c.records()[0].features[2], Some(Value::Level(0)));
    }

    #[test]
    fn rejects_unknown_category() {
        let text = format!("{HEADER}\n1,64,Female,Martian,Medicare,1,104,111,140,1,MICU\n");
        let err = ingest_cohort(text.as_bytes(), tiny_schema()).unwrap_err();
        assert!(matches!(err, CohortError::UnknownCategory { ref column, ref value, .. } if column == "race" && value == "Martian"));
        let text = format!("{HEADER}\n1,64,Female,White,Medicare,1,104,111,140,1,micu\n");
        assert!(matches!(
            ingest_cohort(text.as_bytes(), tiny_schema()),
            Err(CohortError::UnknownCategory { .. })
        ));
    }

    #[test]
    fn rejects_wrong_arity() {
        let text = format!("{HEADER}\n1,64,Female,White,Medicare,1,104\n");
        assert!(matches!(
            ingest_cohort(text.as_bytes(), tiny_schema()),
            Err(CohortError::MalformedRow { line: 2, expected: 11, found: 7 })
        ));
    }

    #[test]
    fn rejects_duplicate_stay_ids() {
        let text = format!(
            "{HEADER}\n7,64,Female,White,Medicare,1,104,111,140,1,MICU\n7,65,Male,White,Medicare,1,104,100,140,1,MICU\n"
        );
        assert!(matches!(
            ingest_cohort(text.as_bytes(), tiny_schema()),
            Err(CohortError::DuplicateStayId(7))
        ));
    }

    #[test]
    fn rejects_header_mismatch() {
        let text = "stay_id,age\n1,2\n";
        assert!(matches!(
            ingest_cohort(text.as_bytes(), tiny_schema()),
            Err(CohortError::HeaderMismatch(_))
        ));
    }

    #[test]
    fn column_order_is_free_on_input() {
        let text = "unit,stay_id,age,gender,race,insurance,is_first_admission,day1_chloride_max,day2_chloride_max,sodium_max,ventilated\nSICU,1,64,Female,White,Medicare,1,104,111,140.5,1\n";
        let c = ingest_cohort(text.as_bytes(), tiny_schema()).unwrap();
        let mut out = Vec::new();
        write_cohort(&c, &mut out).unwrap();
        let back = String::from_utf8(out).unwrap();
        assert!(back.starts_with(HEADER));
        assert!(back.contains("1,64,Female,White,Medicare,1,104,111,140.5,1,SICU"));
    }
}
