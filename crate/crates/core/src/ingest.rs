//! CSV ingestion, cleaning and construction of balanced per-failure datasets.
//!
//! The schema file is TOML:
//!
//! ```toml
//! unit_column = "unit"
//! date_column = "date"
//! failure_columns = ["lockout_11", "warning_low_t1"]
//!
//! [[sensor_columns]]
//! name = "s2_temp_min"     # CSV header
//! sensor = "s2_temp"       # optional, defaults to `name`
//! statistic = "min"        # min | max | avg | range
//!
//! [plausibility_ranges]    # optional, inclusive bounds
//! s2_temp_min = [-60.0, 400.0]
//!
//! [learner]                # optional defaults for the learner
//! max_inputs = 3
//! min_top_significance = 0.0
//! ```

use std::collections::{BTreeMap, HashMap, HashSet};
use std::io::{Read, Write};
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, FailureColumn, RecordKey, SensorColumn, Statistic};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorSpec {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sensor: Option<String>,
    pub statistic: Statistic,
}

impl SensorSpec {
    pub fn sensor_name(&self) -> &str {
        self.sensor.as_deref().unwrap_or(&self.name)
    }
}

/// Optional learner defaults carried in the schema file. CLI flags win.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LearnerSection {
    pub max_inputs: Option<usize>,
    pub min_top_significance: Option<f64>,
    pub random_seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemaConfig {
    pub unit_column: String,
    pub date_column: String,
    #[serde(default)]
    pub sensor_columns: Vec<SensorSpec>,
    #[serde(default)]
    pub failure_columns: Vec<String>,
    #[serde(default)]
    pub plausibility_ranges: BTreeMap<String, (f64, f64)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub learner: Option<LearnerSection>,
}

impl SchemaConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let schema: SchemaConfig = toml::from_str(text)?;
        schema.validate()?;
        Ok(schema)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("schema serializes to TOML")
    }

    pub fn validate(&self) -> Result<()> {
        let mut seen = HashSet::new();
        for name in self
            .sensor_columns
            .iter()
            .map(|s| &s.name)
            .chain(&self.failure_columns)
        {
            if !seen.insert(name.as_str()) {
                return Err(Error::Config(format!(
                    "column `{name}` listed more than once"
                )));
            }
        }
        for key in [&self.unit_column, &self.date_column] {
            if seen.contains(key.as_str()) {
                return Err(Error::Config(format!(
                    "key column `{key}` also listed as a data column"
                )));
            }
        }
        for (name, (lo, hi)) in &self.plausibility_ranges {
            if lo.partial_cmp(hi) != Some(std::cmp::Ordering::Less) {
                return Err(Error::Config(format!(
                    "plausibility range for `{name}` needs lo < hi, got ({lo}, {hi})"
                )));
            }
        }
        Ok(())
    }
}

pub fn load_csv(path: impl AsRef<Path>, schema: &SchemaConfig) -> Result<Dataset> {
    read_csv(std::fs::File::open(path)?, schema)
}

pub fn read_csv<R: Read>(reader: R, schema: &SchemaConfig) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let index: HashMap<&str, usize> = headers.iter().enumerate().map(|(i, h)| (h.trim(), i)).collect();

    let required = [&schema.unit_column, &schema.date_column]
        .into_iter()
        .chain(schema.sensor_columns.iter().map(|s| &s.name))
        .chain(&schema.failure_columns);
    let missing: Vec<String> = required
        .filter(|name| !index.contains_key(name.as_str()))
        .cloned()
        .collect();
    if !missing.is_empty() {
        return Err(Error::MissingColumns(missing));
    }

    let unit_idx = index[schema.unit_column.as_str()];
    let date_idx = index[schema.date_column.as_str()];
    let sensor_idx: Vec<usize> = schema.sensor_columns.iter().map(|s| index[s.name.as_str()]).collect();
    let failure_idx: Vec<usize> = schema.failure_columns.iter().map(|f| index[f.as_str()]).collect();

    let mut keys = Vec::new();
    let mut sensor_values: Vec<Vec<Option<f64>>> = vec![Vec::new(); sensor_idx.len()];
    let mut failure_values: Vec<Vec<bool>> = vec![Vec::new(); failure_idx.len()];

    for record in rdr.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let field = |i: usize| record.get(i).unwrap_or("").trim();

        let date = NaiveDate::parse_from_str(field(date_idx), "%Y-%m-%d").map_err(|e| Error::Row {
            row: line,
            message: format!("bad date `{}`: {e}", field(date_idx)),
        })?;
        keys.push(RecordKey::new(field(unit_idx), date));

        for (col, &i) in sensor_values.iter_mut().zip(&sensor_idx) {
            col.push(parse_sensor(field(i)));
        }
        for ((col, &i), name) in failure_values.iter_mut().zip(&failure_idx).zip(&schema.failure_columns) {
            let cell = field(i);
            let value = parse_failure(cell).ok_or_else(|| Error::Row {
                row: line,
                message: format!("malformed failure cell `{cell}` in column `{name}`"),
            })?;
            col.push(value);
        }
    }

    let sensors = schema
        .sensor_columns
        .iter()
        .zip(sensor_values)
        .map(|(spec, values)| SensorColumn::new(&spec.name, spec.sensor_name(), spec.statistic, values))
        .collect();
    let failures = schema
        .failure_columns
        .iter()
        .zip(failure_values)
        .map(|(name, values)| FailureColumn::new(name, values))
        .collect();
    Dataset::new(keys, sensors, failures)
}

/// Lenient numeric parse; anything that is not a finite number is missing.
fn parse_sensor(cell: &str) -> Option<f64> {
    cell.parse::<f64>().ok().filter(|v| v.is_finite())
}

/// An empty failure cell reads as "no failure recorded".
fn parse_failure(cell: &str) -> Option<bool> {
    match cell.to_ascii_lowercase().as_str() {
        "1" | "true" => Some(true),
        "0" | "false" | "" => Some(false),
        _ => None,
    }
}

/// Writes `d` as CSV with the given key column names. Missing sensor
/// cells are written empty, failures as `0`/`1`.
pub fn write_csv<W: Write>(d: &Dataset, unit_column: &str, date_column: &str, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec![unit_column.to_string(), date_column.to_string()];
    header.extend(d.sensors().iter().map(|c| c.name.clone()));
    header.extend(d.failures().iter().map(|c| c.name.clone()));
    w.write_record(&header)?;
    for (row, key) in d.keys().iter().enumerate() {
        let mut rec = vec![key.unit_id.clone(), key.date.format("%Y-%m-%d").to_string()];
        rec.extend(
            d.sensors()
                .iter()
                .map(|c| c.values[row].map(|v| v.to_string()).unwrap_or_default()),
        );
        rec.extend(
            d.failures()
                .iter()
                .map(|c| if c.values[row] { "1" } else { "0" }.to_string()),
        );
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Keeps the first record for every `(unit_id, date)`.
pub fn deduplicate(d: &Dataset) -> Dataset {
    let mut seen = HashSet::with_capacity(d.len());
    let keep: Vec<usize> = d
        .keys()
        .iter()
        .enumerate()
        .filter(|(_, k)| seen.insert(*k))
        .map(|(i, _)| i)
        .collect();
    if keep.len() == d.len() {
        return d.clone();
    }
    d.select_rows(&keep)
}

/// Drops records with a configured sensor outside its inclusive range.
/// Missing cells and unconfigured sensors never cause a drop.
pub fn filter_corrupt(d: &Dataset, schema: &SchemaConfig) -> Dataset {
    let checks: Vec<(&SensorColumn, f64, f64)> = schema
        .plausibility_ranges
        .iter()
        .filter_map(|(name, &(lo, hi))| d.sensor(name).map(|c| (c, lo, hi)))
        .collect();
    if checks.is_empty() {
        return d.clone();
    }
    let keep: Vec<usize> = (0..d.len())
        .filter(|&row| {
            checks.iter().all(|(c, lo, hi)| match c.values[row] {
                Some(v) => v >= *lo && v <= *hi,
                None => true,
            })
        })
        .collect();
    d.select_rows(&keep)
}

/// A failure record and the normal record it was paired with, as row
/// indices into the source dataset.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Pairing {
    pub failure_row: usize,
    pub normal_row: usize,
}

/// Per-failure dataset: every matched failure record followed by its
/// normal counterpart.
#[derive(Debug, Clone)]
pub struct BalancedDataset {
    pub data: Dataset,
    pub failure: String,
    pub pairs: Vec<Pairing>,
    /// Failure records without an earlier normal record for the same unit.
    pub dropped: usize,
}

impl BalancedDataset {
    pub fn failure_column(&self) -> &FailureColumn {
        &self.data.failures()[0]
    }
}

/// Pairs every failure record with the same unit's most recent normal
/// record strictly before it. A normal record may serve several failures;
/// it is then materialized once per pairing.
pub fn balance(d: &Dataset, failure_name: &str) -> Result<BalancedDataset> {
    let failure = d
        .failure(failure_name)
        .ok_or_else(|| Error::UnknownColumn(failure_name.to_string()))?;
    let total_failures = failure.values.iter().filter(|b| **b).count();
    if total_failures == 0 {
        return Err(Error::NoPositiveExamples);
    }

    let mut by_unit: HashMap<&str, Vec<usize>> = HashMap::new();
    for (i, k) in d.keys().iter().enumerate() {
        by_unit.entry(k.unit_id.as_str()).or_default().push(i);
    }

    let mut partner: Vec<Option<usize>> = vec![None; d.len()];
    for rows in by_unit.values_mut() {
        rows.sort_by_key(|&i| (d.keys()[i].date, i));
        let mut last_normal: Option<usize> = None;
        let mut start = 0;
        while start < rows.len() {
            let date = d.keys()[rows[start]].date;
            let end = start + rows[start..].iter().take_while(|&&i| d.keys()[i].date == date).count();
            let day = &rows[start..end];
            for &i in day.iter().filter(|&&i| failure.values[i]) {
                partner[i] = last_normal;
            }
            if let Some(&i) = day.iter().rev().find(|&&i| !failure.values[i]) {
                last_normal = Some(i);
            }
            start = end;
        }
    }

    let pairs: Vec<Pairing> = (0..d.len())
        .filter(|&i| failure.values[i])
        .filter_map(|i| {
            partner[i].map(|n| Pairing {
                failure_row: i,
                normal_row: n,
            })
        })
        .collect();
    if pairs.is_empty() {
        return Err(Error::NoMatchedPairs);
    }
    let rows: Vec<usize> = pairs.iter().flat_map(|p| [p.failure_row, p.normal_row]).collect();
    let data = d.with_single_failure(failure_name)?.select_rows(&rows);
    Ok(BalancedDataset {
        data,
        failure: failure_name.to_string(),
        dropped: total_failures - pairs.len(),
        pairs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn schema() -> SchemaConfig {
        SchemaConfig::from_toml(
            r#"
            unit_column = "unit"
            date_column = "date"
            failure_columns = ["fail"]

            [[sensor_columns]]
            name = "pressure"
            statistic = "min"

            [[sensor_columns]]
            name = "temp_max"
            sensor = "temp"
            statistic = "max"
            "#,
        )
        .unwrap()
    }

    fn day(d: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(2021, 3, d).unwrap()
    }

    #[test]
    fn loads_complete_csv() {
        let csv = "unit,date,pressure,temp_max,fail\nA,2021-03-01,1.5,20,0\nA,2021-03-02,1.0,21,1\nB,2021-03-01,2.0,19,false\n";
        let d = read_csv(csv.as_bytes(), &schema()).unwrap();
        assert_eq!(d.len(), 3);
        assert_eq!(d.sensor("temp_max").unwrap().sensor, "temp");
        assert_eq!(d.failure("fail").unwrap().values, vec![false, true, false]);
    }

    #[test]
    fn unparseable_sensor_cell_is_missing() {
        let csv = "unit,date,pressure,temp_max,fail\nA,2021-03-01,abc,20,0\n";
        let d = read_csv(csv.as_bytes(), &schema()).unwrap();
        assert_eq!(d.len(), 1);
        assert_eq!(d.sensor("pressure").unwrap().values, vec![None]);
        assert_eq!(d.sensor("temp_max").unwrap().values, vec![Some(20.0)]);
    }

    #[test]
    fn missing_date_column_is_schema_error() {
        let csv = "unit,pressure,temp_max,fail\nA,1,2,0\n";
        match read_csv(csv.as_bytes(), &schema()) {
            Err(Error::MissingColumns(cols)) => assert_eq!(cols, vec!["date".to_string()]),
            other => panic!("expected schema error, got {other:?}"),
        }
    }

    #[test]
    fn malformed_failure_cell_reports_row() {
        let csv = "unit,date,pressure,temp_max,fail\nA,2021-03-01,1,2,0\nA,2021-03-02,1,2,maybe\n";
        match read_csv(csv.as_bytes(), &schema()) {
            Err(Error::Row { row, .. }) => assert_eq!(row, 3),
            other => panic!("expected row error, got {other:?}"),
        }
    }

    #[test]
    fn schema_validation() {
        let bad_range = r#"
            unit_column = "u"
            date_column = "d"
            failure_columns = ["f"]
            [plausibility_ranges]
            p = [5.0, 1.0]
        "#;
        assert!(SchemaConfig::from_toml(bad_range).is_err());
        let overlap = r#"
            unit_column = "u"
            date_column = "d"
            failure_columns = ["p"]
            [[sensor_columns]]
            name = "p"
            statistic = "min"
        "#;
        assert!(SchemaConfig::from_toml(overlap).is_err());
    }

    #[test]
    fn csv_roundtrip_through_writer() {
        let csv = "unit,date,pressure,temp_max,fail\nA,2021-03-01,0.1,,0\nA,2021-03-02,327.67,21.5,1\n";
        let d = read_csv(csv.as_bytes(), &schema()).unwrap();
        let mut out = Vec::new();
        write_csv(&d, "unit", "date", &mut out).unwrap();
        let back = read_csv(out.as_slice(), &schema()).unwrap();
        assert_eq!(back, d);
    }

    fn dataset(rows: &[(&str, u32, f64, bool)]) -> Dataset {
        Dataset::new(
            rows.iter().map(|r| RecordKey::new(r.0, day(r.1))).collect(),
            vec![SensorColumn::new("pressure", "pressure", Statistic::Min, rows.iter().map(|r| Some(r.2)).collect())],
            vec![FailureColumn::new("fail", rows.iter().map(|r| r.3).collect())],
        )
        .unwrap()
    }

    #[test]
    fn dedup_cases() {
        let two_identical = dataset(&[("A", 1, 1.0, false), ("A", 1, 1.0, false)]);
        assert_eq!(deduplicate(&two_identical).len(), 1);

        let conflicting = dataset(&[
            ("A", 1, 1.0, false),
            ("B", 1, 2.0, false),
            ("A", 1, 9.0, true),
            ("A", 2, 3.0, false),
            ("B", 1, 8.0, true),
        ]);
        let out = deduplicate(&conflicting);
        assert_eq!(out.len(), 3);
        assert_eq!(out.sensor("pressure").unwrap().values, vec![Some(1.0), Some(2.0), Some(3.0)]);
        assert_eq!(out.failure("fail").unwrap().values, vec![false, false, false]);

        let clean = dataset(&[("A", 1, 1.0, false), ("A", 2, 1.0, true)]);
        assert_eq!(deduplicate(&clean), clean);
    }

    #[test]
    fn corrupt_filter() {
        let d = dataset(&[("A", 1, -3.0, false), ("A", 2, 5.0, false), ("A", 3, 327.67, true)]);
        let mut s = schema();
        assert_eq!(filter_corrupt(&d, &s), d);
        s.plausibility_ranges.insert("pressure".into(), (0.0, 10.0));
        let out = filter_corrupt(&d, &s);
        assert_eq!(out.sensor("pressure").unwrap().values, vec![Some(5.0)]);
    }

    #[test]
    fn extreme_register_value_kept_without_range() {
        let d = dataset(&[("A", 1, 327.67, false)]);
        let mut s = schema();
        s.plausibility_ranges.insert("temp_max".into(), (-60.0, 100.0));
        assert_eq!(filter_corrupt(&d, &s).len(), 1);
    }

    #[test]
    fn balance_single_pair() {
        let d = dataset(&[("A", 1, 1.0, false), ("A", 2, 2.0, true)]);
        let b = balance(&d, "fail").unwrap();
        assert_eq!(b.pairs, vec![Pairing { failure_row: 1, normal_row: 0 }]);
        assert_eq!(b.data.len(), 2);
        assert_eq!(b.failure_column().values, vec![true, false]);
    }

    #[test]
    fn balance_drops_failure_without_prior_normal() {
        let d = dataset(&[("A", 1, 1.0, true), ("A", 2, 1.0, false), ("A", 3, 1.0, true)]);
        let b = balance(&d, "fail").unwrap();
        assert_eq!(b.dropped, 1);
        assert_eq!(b.pairs, vec![Pairing { failure_row: 2, normal_row: 1 }]);
    }

    #[test]
    fn balance_picks_most_recent_normal() {
        let d = dataset(&[
            ("A", 2, 2.0, false),
            ("B", 2, 7.0, false),
            ("A", 1, 1.0, false),
            ("A", 3, 3.0, true),
        ]);
        let b = balance(&d, "fail").unwrap();
        assert_eq!(b.pairs, vec![Pairing { failure_row: 3, normal_row: 0 }]);
        assert_eq!(b.data.sensor("pressure").unwrap().values, vec![Some(3.0), Some(2.0)]);
    }

    #[test]
    fn balance_reuses_normal_row() {
        let d = dataset(&[("A", 1, 1.0, false), ("A", 2, 2.0, true), ("A", 3, 3.0, true)]);
        let b = balance(&d, "fail").unwrap();
        assert_eq!(b.data.len(), 4);
        assert!(b.pairs.iter().all(|p| p.normal_row == 0));
    }

    #[test]
    fn balance_errors() {
        let d = dataset(&[("A", 1, 1.0, false)]);
        assert!(matches!(balance(&d, "fail"), Err(Error::NoPositiveExamples)));
        assert!(matches!(balance(&d, "nope"), Err(Error::UnknownColumn(_))));
        let only_failures = dataset(&[("A", 1, 1.0, true)]);
        assert!(matches!(balance(&only_failures, "fail"), Err(Error::NoMatchedPairs)));
    }

    fn arb_rows() -> impl Strategy<Value = Vec<(u8, u32, bool)>> {
        proptest::collection::vec((0u8..4, 1u32..15, any::<bool>()), 1..60)
    }

    proptest! {
        #[test]
        fn dedup_idempotent(rows in arb_rows()) {
            let owned: Vec<(String, u32, f64, bool)> =
                rows.iter().enumerate().map(|(i, r)| (format!("u{}", r.0), r.1, i as f64, r.2)).collect();
            let refs: Vec<(&str, u32, f64, bool)> = owned.iter().map(|r| (r.0.as_str(), r.1, r.2, r.3)).collect();
            let d = dataset(&refs);
            let once = deduplicate(&d);
            prop_assert_eq!(deduplicate(&once), once.clone());
            let keys: HashSet<_> = once.keys().iter().collect();
            prop_assert_eq!(keys.len(), once.len());
        }

        #[test]
        fn balance_pairs_are_latest_earlier_normals(rows in arb_rows()) {
            let owned: Vec<(String, u32, f64, bool)> =
                rows.iter().enumerate().map(|(i, r)| (format!("u{}", r.0), r.1, i as f64, r.2)).collect();
            let refs: Vec<(&str, u32, f64, bool)> = owned.iter().map(|r| (r.0.as_str(), r.1, r.2, r.3)).collect();
            let d = deduplicate(&dataset(&refs));
            let f = &d.failure("fail").unwrap().values;
            if let Ok(b) = balance(&d, "fail") {
                for p in &b.pairs {
                    let fk = &d.keys()[p.failure_row];
                    let nk = &d.keys()[p.normal_row];
                    prop_assert!(f[p.failure_row] && !f[p.normal_row]);
                    prop_assert_eq!(&fk.unit_id, &nk.unit_id);
                    prop_assert!(nk.date < fk.date);
                    let later = (0..d.len()).any(|j| {
                        !f[j] && d.keys()[j].unit_id == fk.unit_id
                            && d.keys()[j].date > nk.date && d.keys()[j].date < fk.date
                    });
                    prop_assert!(!later);
                }
                let ones = b.failure_column().values.iter().filter(|v| **v).count();
                prop_assert_eq!(ones * 2, b.data.len());
                prop_assert_eq!(b.pairs.len() + b.dropped, f.iter().filter(|v| **v).count());
            }
        }
    }
}
