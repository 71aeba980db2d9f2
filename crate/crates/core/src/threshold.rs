//! Information-gain thresholds for sensor columns.
//!
//! For a sensor column `s` and failure column `f`, every distinct value of
//! `s` is tried as a threshold `θ`. Rows with `s ≤ θ` form the left split,
//! the rest the right split, and the threshold with the largest entropy
//! reduction wins. The side whose failure rate is higher becomes the
//! "failure side", and discretizing the sensor yields a Boolean column that
//! is 1 on that side.

use std::cmp::Ordering;
use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bits::BitColumn;
use crate::data::{pairwise, FailureColumn, SensorColumn, Statistic};
use crate::error::{Error, Result};
use crate::ingest::BalancedDataset;

/// Gains closer than this are treated as tied, and the smaller threshold
/// wins. Keeps the choice stable against last-bit rounding differences.
pub const GAIN_TIE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum FailureSide {
    /// Failure associates with `s ≤ θ`.
    Leq,
    /// Failure associates with `s > θ`.
    Gt,
}

impl FailureSide {
    pub fn holds(self, value: f64, theta: f64) -> bool {
        match self {
            FailureSide::Leq => value <= theta,
            FailureSide::Gt => value > theta,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            FailureSide::Leq => "≤",
            FailureSide::Gt => ">",
        }
    }
}

/// Learned split for one sensor column with respect to one failure column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Threshold {
    /// Source column name.
    pub column: String,
    /// Physical sensor name, used for labels.
    pub sensor: String,
    pub statistic: Statistic,
    pub theta: f64,
    /// Entropy reduction in bits.
    pub gain: f64,
    pub failure_side: FailureSide,
}

impl Threshold {
    /// Human-readable condition, e.g. `min(s2_temp) ≤ 21.0`.
    pub fn label(&self) -> String {
        format!(
            "{}({}) {} {:?}",
            self.statistic,
            self.sensor,
            self.failure_side.symbol(),
            self.theta
        )
    }
}

impl fmt::Display for Threshold {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

/// Binary entropy of a label column, in bits.
pub fn entropy(labels: &[bool]) -> Result<f64> {
    if labels.is_empty() {
        return Err(Error::EmptyColumn);
    }
    let ones = labels.iter().filter(|b| **b).count();
    Ok(entropy_counts(labels.len() - ones, ones))
}

/// Binary entropy from class counts; 0 for an empty set.
pub fn entropy_counts(zeros: usize, ones: usize) -> f64 {
    let n = zeros + ones;
    if n == 0 {
        return 0.0;
    }
    let term = |c: usize| {
        if c == 0 {
            0.0
        } else {
            let p = c as f64 / n as f64;
            p * p.log2()
        }
    };
    -(term(zeros) + term(ones))
}

#[derive(Debug, Clone, Copy, Default)]
struct Counts {
    zeros: usize,
    ones: usize,
}

impl Counts {
    fn total(self) -> usize {
        self.zeros + self.ones
    }
}

fn gain_counts(left: Counts, right: Counts) -> f64 {
    let n = (left.total() + right.total()) as f64;
    let whole = entropy_counts(left.zeros + right.zeros, left.ones + right.ones);
    let g = whole
        - left.total() as f64 / n * entropy_counts(left.zeros, left.ones)
        - right.total() as f64 / n * entropy_counts(right.zeros, right.ones);
    g.max(0.0)
}

fn check_aligned(values: &[f64], labels: &[bool]) -> Result<()> {
    if values.is_empty() {
        return Err(Error::EmptyColumn);
    }
    if values.len() != labels.len() {
        return Err(Error::LengthMismatch {
            column: "labels".into(),
            expected: values.len(),
            found: labels.len(),
        });
    }
    Ok(())
}

/// Information gain of splitting at `theta` (left split is `s ≤ theta`).
pub fn gain(values: &[f64], labels: &[bool], theta: f64) -> Result<f64> {
    check_aligned(values, labels)?;
    let mut left = Counts::default();
    let mut right = Counts::default();
    for (&v, &f) in values.iter().zip(labels) {
        let side = if v <= theta { &mut left } else { &mut right };
        if f {
            side.ones += 1;
        } else {
            side.zeros += 1;
        }
    }
    Ok(gain_counts(left, right))
}

/// Winning threshold of a scan, without column metadata.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Split {
    pub theta: f64,
    pub gain: f64,
    pub failure_side: FailureSide,
}

/// Scans every distinct value of `values` as a threshold.
///
/// One sort plus a linear sweep: after sorting, the left split for the
/// k-th distinct value is a prefix, so class counts accumulate.
pub fn find_optimal_split(values: &[f64], labels: &[bool]) -> Result<Split> {
    check_aligned(values, labels)?;
    let ones = labels.iter().filter(|b| **b).count();
    if ones == 0 || ones == labels.len() {
        return Err(Error::DegenerateLabels);
    }
    let total = Counts {
        zeros: labels.len() - ones,
        ones,
    };

    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_unstable_by(|&a, &b| values[a].total_cmp(&values[b]));

    // (theta, gain, left counts) per distinct value, ascending theta
    let mut candidates: Vec<(f64, f64, Counts)> = Vec::new();
    let mut left = Counts::default();
    let mut i = 0;
    while i < order.len() {
        let theta = values[order[i]];
        while i < order.len() && values[order[i]] == theta {
            if labels[order[i]] {
                left.ones += 1;
            } else {
                left.zeros += 1;
            }
            i += 1;
        }
        let right = Counts {
            zeros: total.zeros - left.zeros,
            ones: total.ones - left.ones,
        };
        candidates.push((theta, gain_counts(left, right), left));
    }
    if candidates.len() < 2 {
        return Err(Error::ConstantSensor);
    }

    let best_gain = candidates
        .iter()
        .map(|c| c.1)
        .fold(f64::NEG_INFINITY, f64::max);
    let &(theta, gain, left) = candidates
        .iter()
        .find(|c| c.1 >= best_gain - GAIN_TIE_TOLERANCE)
        .expect("at least one candidate");
    let right = Counts {
        zeros: total.zeros - left.zeros,
        ones: total.ones - left.ones,
    };
    Ok(Split {
        theta,
        gain,
        failure_side: failure_side(left, right),
    })
}

/// GT only when the right split's failure rate is strictly higher;
/// compared by cross-multiplication so equal rates tie exactly.
fn failure_side(left: Counts, right: Counts) -> FailureSide {
    let lhs = right.ones as u128 * left.total() as u128;
    let rhs = left.ones as u128 * right.total() as u128;
    match lhs.cmp(&rhs) {
        Ordering::Greater => FailureSide::Gt,
        _ => FailureSide::Leq,
    }
}

/// Learns the threshold for `sensor` against `failure`, ignoring rows
/// where the sensor value is missing.
pub fn find_optimal_threshold(sensor: &SensorColumn, failure: &FailureColumn) -> Result<Threshold> {
    if sensor.len() != failure.len() {
        return Err(Error::LengthMismatch {
            column: failure.name.clone(),
            expected: sensor.len(),
            found: failure.len(),
        });
    }
    let (values, labels) = pairwise(sensor, failure);
    if values.is_empty() {
        return Err(Error::NoUsableRows);
    }
    let split = find_optimal_split(&values, &labels)?;
    Ok(Threshold {
        column: sensor.name.clone(),
        sensor: sensor.sensor.clone(),
        statistic: sensor.statistic,
        theta: split.theta,
        gain: split.gain,
        failure_side: split.failure_side,
    })
}

/// A sensor column turned Boolean by its threshold: 1 on the failure side.
#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdedVariable {
    pub threshold: Threshold,
    pub values: BitColumn,
}

impl ThresholdedVariable {
    pub fn name(&self) -> &str {
        &self.threshold.column
    }
}

/// Applies `t` to `sensor`. Missing sensor cells stay missing.
pub fn discretize(sensor: &SensorColumn, t: &Threshold) -> Result<ThresholdedVariable> {
    if sensor.name != t.column || sensor.statistic != t.statistic {
        return Err(Error::ThresholdMismatch {
            expected: format!("{}[{}]", t.column, t.statistic),
            found: format!("{}[{}]", sensor.name, sensor.statistic),
        });
    }
    let cells = sensor
        .values
        .iter()
        .map(|v| v.map(|v| t.failure_side.holds(v, t.theta)));
    Ok(ThresholdedVariable {
        threshold: t.clone(),
        values: BitColumn::from_options(cells, sensor.len()),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedSensor {
    pub column: String,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ThresholdReport {
    pub thresholds: Vec<Threshold>,
    pub skipped: Vec<SkippedSensor>,
}

/// Thresholds every sensor column of `statistic` against the balanced
/// dataset's failure column. Columns are processed in parallel; output
/// keeps table order. Constant or all-missing columns are skipped.
pub fn threshold_all(balanced: &BalancedDataset, statistic: Statistic) -> ThresholdReport {
    let failure = balanced.failure_column();
    let sensors: Vec<&SensorColumn> = balanced.data.sensors_with(statistic).collect();
    let results: Vec<(String, Result<Threshold>)> = sensors
        .par_iter()
        .map(|s| (s.name.clone(), find_optimal_threshold(s, failure)))
        .collect();

    let mut report = ThresholdReport::default();
    for (column, result) in results {
        match result {
            Ok(t) => report.thresholds.push(t),
            Err(e) => report.skipped.push(SkippedSensor {
                column,
                reason: e.to_string(),
            }),
        }
    }
    report
}
