//! Columnar dataset of daily sensor statistics and failure indicators.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Identifies one record: a unit (e.g. a heater) on one calendar day.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RecordKey {
    pub unit_id: String,
    pub date: NaiveDate,
}

impl RecordKey {
    pub fn new(unit_id: impl Into<String>, date: NaiveDate) -> Self {
        RecordKey {
            unit_id: unit_id.into(),
            date,
        }
    }
}

/// Daily statistic a sensor column was computed with.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Statistic {
    Min,
    Max,
    Avg,
    Range,
}

impl Statistic {
    pub const ALL: [Statistic; 4] = [
        Statistic::Min,
        Statistic::Max,
        Statistic::Avg,
        Statistic::Range,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Statistic::Min => "min",
            Statistic::Max => "max",
            Statistic::Avg => "avg",
            Statistic::Range => "range",
        }
    }
}

impl fmt::Display for Statistic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Statistic {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "min" => Ok(Statistic::Min),
            "max" => Ok(Statistic::Max),
            "avg" | "mean" => Ok(Statistic::Avg),
            "range" => Ok(Statistic::Range),
            other => Err(Error::Config(format!("unknown statistic `{other}`"))),
        }
    }
}

/// Real-valued column for one (sensor, statistic) pair.
///
/// `name` is the column name in the source table and is unique within a
/// [`Dataset`]; `sensor` is the physical sensor it was derived from, used
/// for human-readable labels such as `min(s2_temp)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SensorColumn {
    pub name: String,
    pub sensor: String,
    pub statistic: Statistic,
    pub values: Vec<Option<f64>>,
}

impl SensorColumn {
    pub fn new(
        name: impl Into<String>,
        sensor: impl Into<String>,
        statistic: Statistic,
        values: Vec<Option<f64>>,
    ) -> Self {
        SensorColumn {
            name: name.into(),
            sensor: sensor.into(),
            statistic,
            values,
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `min(s2_temp)` style label.
    pub fn display_name(&self) -> String {
        format!("{}({})", self.statistic, self.sensor)
    }
}

/// Boolean failure indicator column; `true` means a failure was recorded.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FailureColumn {
    pub name: String,
    pub values: Vec<bool>,
}

impl FailureColumn {
    pub fn new(name: impl Into<String>, values: Vec<bool>) -> Self {
        FailureColumn {
            name: name.into(),
            values,
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn class_proportions(&self) -> Result<(f64, f64)> {
        class_proportions(&self.values)
    }
}

/// Proportions `(p0, p1)` of normal and failure labels.
pub fn class_proportions(labels: &[bool]) -> Result<(f64, f64)> {
    if labels.is_empty() {
        return Err(Error::EmptyColumn);
    }
    let n = labels.len();
    let ones = labels.iter().filter(|b| **b).count();
    let p0 = (n - ones) as f64 / n as f64;
    // derived from the count rather than `1 - p0` so both sides are exact
    let p1 = ones as f64 / n as f64;
    Ok((p0, p1))
}

/// Immutable table of records. All columns have one entry per key.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    keys: Vec<RecordKey>,
    sensors: Vec<SensorColumn>,
    failures: Vec<FailureColumn>,
}

impl Dataset {
    pub fn new(
        keys: Vec<RecordKey>,
        sensors: Vec<SensorColumn>,
        failures: Vec<FailureColumn>,
    ) -> Result<Self> {
        let n = keys.len();
        let mut names = HashSet::new();
        for (name, len) in sensors
            .iter()
            .map(|c| (&c.name, c.len()))
            .chain(failures.iter().map(|c| (&c.name, c.len())))
        {
            if !names.insert(name.as_str()) {
                return Err(Error::DuplicateColumn(name.clone()));
            }
            if len != n {
                return Err(Error::LengthMismatch {
                    column: name.clone(),
                    expected: n,
                    found: len,
                });
            }
        }
        Ok(Dataset {
            keys,
            sensors,
            failures,
        })
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    pub fn keys(&self) -> &[RecordKey] {
        &self.keys
    }

    pub fn sensors(&self) -> &[SensorColumn] {
        &self.sensors
    }

    pub fn failures(&self) -> &[FailureColumn] {
        &self.failures
    }

    pub fn sensor(&self, name: &str) -> Option<&SensorColumn> {
        self.sensors.iter().find(|c| c.name == name)
    }

    pub fn failure(&self, name: &str) -> Option<&FailureColumn> {
        self.failures.iter().find(|c| c.name == name)
    }

    /// Sensor columns computed with `statistic`, in table order.
    pub fn sensors_with(&self, statistic: Statistic) -> impl Iterator<Item = &SensorColumn> {
        self.sensors.iter().filter(move |c| c.statistic == statistic)
    }

    /// New dataset holding the given rows, in the given order. Indices may
    /// repeat, in which case the row is materialized more than once.
    pub fn select_rows(&self, rows: &[usize]) -> Dataset {
        let keys = rows.iter().map(|&i| self.keys[i].clone()).collect();
        let sensors = self
            .sensors
            .iter()
            .map(|c| SensorColumn {
                name: c.name.clone(),
                sensor: c.sensor.clone(),
                statistic: c.statistic,
                values: rows.iter().map(|&i| c.values[i]).collect(),
            })
            .collect();
        let failures = self
            .failures
            .iter()
            .map(|c| FailureColumn {
                name: c.name.clone(),
                values: rows.iter().map(|&i| c.values[i]).collect(),
            })
            .collect();
        Dataset {
            keys,
            sensors,
            failures,
        }
    }

    /// Same rows, keeping only the named failure column.
    pub fn with_single_failure(&self, failure_name: &str) -> Result<Dataset> {
        let failure = self
            .failure(failure_name)
            .ok_or_else(|| Error::UnknownColumn(failure_name.to_string()))?
            .clone();
        Ok(Dataset {
            keys: self.keys.clone(),
            sensors: self.sensors.clone(),
            failures: vec![failure],
        })
    }

    /// Aligned `(sensor, failure)` pair with rows whose sensor value is
    /// missing removed. The sensor is looked up by column name or by
    /// physical sensor name, and must have the requested statistic.
    pub fn project(
        &self,
        sensor_name: &str,
        statistic: Statistic,
        failure_name: &str,
    ) -> Result<(SensorColumn, FailureColumn)> {
        let sensor = self
            .sensors
            .iter()
            .find(|c| c.statistic == statistic && c.name == sensor_name)
            .or_else(|| {
                self.sensors
                    .iter()
                    .find(|c| c.statistic == statistic && c.sensor == sensor_name)
            })
            .ok_or_else(|| Error::UnknownColumn(format!("{statistic}({sensor_name})")))?;
        let failure = self
            .failure(failure_name)
            .ok_or_else(|| Error::UnknownColumn(failure_name.to_string()))?;
        let (values, labels) = pairwise(sensor, failure);
        if values.is_empty() {
            return Err(Error::NoUsableRows);
        }
        Ok((
            SensorColumn {
                name: sensor.name.clone(),
                sensor: sensor.sensor.clone(),
                statistic: sensor.statistic,
                values: values.into_iter().map(Some).collect(),
            },
            FailureColumn::new(failure.name.clone(), labels),
        ))
    }
}

/// Pairwise deletion: the rows where the sensor value is present.
pub(crate) fn pairwise(sensor: &SensorColumn, failure: &FailureColumn) -> (Vec<f64>, Vec<bool>) {
    sensor
        .values
        .iter()
        .zip(&failure.values)
        .filter_map(|(v, &f)| v.map(|v| (v, f)))
        .unzip()
}
