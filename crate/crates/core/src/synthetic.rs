//! Synthetic datasets drawn from a known fault tree, for measuring how well
//! the learner recovers planted structure.
//!
//! Each record samples every basic event with its probability, propagates
//! the states through the gates to the failure, optionally flips the
//! failure label, and then draws every planted sensor from the uniform
//! interval matching its event's state. Decoy sensors are uniform and
//! independent of everything else.
//!
//! Record `i` uses its own ChaCha stream (`seed`, stream `i`), so output is
//! independent of generation order and rows are produced in parallel.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use chrono::{Days, NaiveDate};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, FailureColumn, RecordKey, SensorColumn, Statistic};
use crate::error::{Error, Result};
use crate::ingest::{SchemaConfig, SensorSpec};
use crate::threshold::FailureSide;
use crate::tree::{EventKind, FaultTree};

/// Value ranges `[lo, hi)` for one planted sensor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensorModel {
    /// Range used when the sensor's event is active.
    pub failure: (f64, f64),
    /// Range used otherwise.
    pub normal: (f64, f64),
}

fn default_decoys() -> usize {
    10
}

fn default_decoy_range() -> (f64, f64) {
    (0.0, 100.0)
}

fn default_start() -> NaiveDate {
    NaiveDate::from_ymd_opt(2020, 1, 1).expect("valid date")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroundTruth {
    /// Planted tree. Basic events carry their firing probability; every
    /// non-TLE event carries the threshold and failure side of its sensor.
    pub tree: FaultTree,
    /// Keyed by sensor column name.
    pub sensor_models: BTreeMap<String, SensorModel>,
    #[serde(default = "default_decoys")]
    pub decoys: usize,
    #[serde(default = "default_decoy_range")]
    pub decoy_range: (f64, f64),
    #[serde(default)]
    pub label_noise: f64,
    pub n_units: usize,
    pub days_per_unit: usize,
    #[serde(default = "default_start")]
    pub start_date: NaiveDate,
}

fn check_range(name: &str, (lo, hi): (f64, f64)) -> Result<()> {
    if lo.is_finite() && hi.is_finite() && lo < hi {
        Ok(())
    } else {
        Err(Error::GroundTruth(format!("interval for `{name}` needs lo < hi, got [{lo}, {hi})")))
    }
}

impl GroundTruth {
    pub fn from_json(text: &str) -> Result<Self> {
        let gt: GroundTruth = serde_json::from_str(text)?;
        gt.validate()?;
        Ok(gt)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("ground truth serializes")
    }

    pub fn statistic(&self) -> Statistic {
        self.tree.statistic.unwrap_or(Statistic::Min)
    }

    pub fn decoy_names(&self) -> Vec<String> {
        (0..self.decoys).map(|i| format!("decoy_{i:02}")).collect()
    }

    /// Column names of the planted sensors, in event order.
    pub fn planted(&self) -> Vec<String> {
        self.tree.variables().map(|t| t.column.clone()).collect()
    }

    pub fn default_rows(&self) -> usize {
        self.n_units * self.days_per_unit
    }

    pub fn validate(&self) -> Result<()> {
        self.tree.validate()?;
        if !(0.0..0.5).contains(&self.label_noise) {
            return Err(Error::GroundTruth(format!(
                "label_noise must lie in [0, 0.5), got {}",
                self.label_noise
            )));
        }
        if self.days_per_unit == 0 {
            return Err(Error::GroundTruth("days_per_unit must be positive".into()));
        }
        check_range("decoys", self.decoy_range)?;
        for e in self.tree.basic_events() {
            match e.probability {
                Some(p) if (0.0..=1.0).contains(&p) => {}
                _ => {
                    return Err(Error::GroundTruth(format!(
                        "basic event `{}` needs a firing probability",
                        e.label
                    )))
                }
            }
        }
        let planted: BTreeSet<String> = self.planted().into_iter().collect();
        for t in self.tree.variables() {
            let m = self
                .sensor_models
                .get(&t.column)
                .ok_or_else(|| Error::GroundTruth(format!("no sensor model for `{}`", t.column)))?;
            check_range(&t.column, m.failure)?;
            check_range(&t.column, m.normal)?;
            let separated = match t.failure_side {
                FailureSide::Gt => m.failure.0 > t.theta && m.normal.1 <= t.theta,
                FailureSide::Leq => m.failure.1 <= t.theta && m.normal.0 > t.theta,
            };
            if !separated {
                return Err(Error::GroundTruth(format!(
                    "intervals for `{}` are not separated by {} {:?}",
                    t.column,
                    t.failure_side.symbol(),
                    t.theta
                )));
            }
        }
        if let Some(name) = self.decoy_names().into_iter().find(|d| planted.contains(d)) {
            return Err(Error::GroundTruth(format!("decoy name `{name}` clashes with a planted sensor")));
        }
        Ok(())
    }

    /// Schema describing datasets produced by [`generate`].
    pub fn schema(&self) -> SchemaConfig {
        let stat = self.statistic();
        let mut sensor_columns: Vec<SensorSpec> = self
            .tree
            .variables()
            .map(|t| SensorSpec {
                name: t.column.clone(),
                sensor: (t.sensor != t.column).then(|| t.sensor.clone()),
                statistic: t.statistic,
            })
            .collect();
        sensor_columns.extend(self.decoy_names().into_iter().map(|name| SensorSpec {
            name,
            sensor: None,
            statistic: stat,
        }));
        SchemaConfig {
            unit_column: "unit".into(),
            date_column: "date".into(),
            sensor_columns,
            failure_columns: vec![self.tree.failure.clone()],
            plausibility_ranges: BTreeMap::new(),
            learner: None,
        }
    }
}

struct Row {
    sensors: Vec<f64>,
    failure: bool,
}

fn sample_row(gt: &GroundTruth, models: &[(usize, SensorModel)], seed: u64, index: u64) -> Row {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    let tree = &gt.tree;
    let mut state = vec![false; tree.events.len()];
    for e in tree.basic_events() {
        state[e.id] = rng.gen_bool(e.probability.unwrap_or(0.0));
    }
    fn resolve(tree: &FaultTree, ev: usize, state: &mut [bool]) -> bool {
        if let Some(g) = tree.gate_producing(ev) {
            let inputs: Vec<bool> = g.inputs.iter().map(|&i| resolve(tree, i, state)).collect();
            state[ev] = g.gate_type.apply(&inputs);
        }
        state[ev]
    }
    let mut failure = resolve(tree, tree.tle(), &mut state);
    if gt.label_noise > 0.0 && rng.gen_bool(gt.label_noise) {
        failure = !failure;
    }
    let mut sensors: Vec<f64> = models
        .iter()
        .map(|(ev, m)| {
            let (lo, hi) = if state[*ev] { m.failure } else { m.normal };
            rng.gen_range(lo..hi)
        })
        .collect();
    let (lo, hi) = gt.decoy_range;
    sensors.extend((0..gt.decoys).map(|_| rng.gen_range(lo..hi)));
    Row { sensors, failure }
}

/// Draws `rows` records (default `n_units * days_per_unit`). Record `i`
/// belongs to unit `i / days_per_unit` on day `i % days_per_unit`.
pub fn generate(gt: &GroundTruth, rows: Option<usize>, seed: u64) -> Result<Dataset> {
    gt.validate()?;
    let n = rows.unwrap_or_else(|| gt.default_rows());
    let models: Vec<(usize, SensorModel)> = gt
        .tree
        .events
        .iter()
        .filter_map(|e| e.variable.as_ref().map(|t| (e.id, gt.sensor_models[&t.column])))
        .collect();

    let sampled: Vec<Row> = (0..n as u64)
        .into_par_iter()
        .map(|i| sample_row(gt, &models, seed, i))
        .collect();

    let keys = (0..n)
        .map(|i| {
            let date = gt
                .start_date
                .checked_add_days(Days::new((i % gt.days_per_unit) as u64))
                .ok_or_else(|| Error::GroundTruth("date overflow".into()))?;
            Ok(RecordKey::new(format!("u{:05}", i / gt.days_per_unit), date))
        })
        .collect::<Result<Vec<_>>>()?;

    let stat = gt.statistic();
    let mut specs: Vec<(String, String, Statistic)> = gt
        .tree
        .events
        .iter()
        .filter_map(|e| e.variable.as_ref())
        .map(|t| (t.column.clone(), t.sensor.clone(), t.statistic))
        .collect();
    specs.extend(gt.decoy_names().into_iter().map(|d| (d.clone(), d, stat)));

    let sensors = specs
        .into_iter()
        .enumerate()
        .map(|(c, (name, sensor, statistic))| {
            SensorColumn::new(name, sensor, statistic, sampled.iter().map(|r| Some(r.sensors[c])).collect())
        })
        .collect();
    let failure = FailureColumn::new(gt.tree.failure.clone(), sampled.iter().map(|r| r.failure).collect());
    Dataset::new(keys, sensors, vec![failure])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecoveryReport {
    pub planted: Vec<String>,
    pub learned: Vec<String>,
    pub recovered: Vec<String>,
    /// Fraction of planted variables present in the learned tree.
    pub recall: f64,
    /// Fraction of learned variables that were planted.
    pub precision: f64,
    /// Mean |θ_learned − θ_true| over recovered variables.
    pub mean_theta_error: Option<f64>,
    pub top_gate_match: bool,
    pub learned_significance: f64,
    pub learned_depth: usize,
    pub truth_depth: usize,
}

pub fn recovery_report(learned: &FaultTree, gt: &GroundTruth) -> RecoveryReport {
    let truth: BTreeMap<&str, f64> = gt.tree.variables().map(|t| (t.column.as_str(), t.theta)).collect();
    let found: BTreeMap<&str, f64> = learned.variables().map(|t| (t.column.as_str(), t.theta)).collect();
    let recovered: Vec<&str> = found.keys().filter(|k| truth.contains_key(*k)).copied().collect();

    let ratio = |num: usize, den: usize| if den == 0 { 0.0 } else { num as f64 / den as f64 };
    let mean_theta_error = (!recovered.is_empty()).then(|| {
        recovered.iter().map(|k| (found[k] - truth[k]).abs()).sum::<f64>() / recovered.len() as f64
    });
    let top_gate_match = match (learned.top_gate(), gt.tree.top_gate()) {
        (Some(a), Some(b)) => a.gate_type == b.gate_type,
        _ => false,
    };
    RecoveryReport {
        planted: truth.keys().map(|s| s.to_string()).collect(),
        learned: found.keys().map(|s| s.to_string()).collect(),
        recovered: recovered.iter().map(|s| s.to_string()).collect(),
        recall: ratio(recovered.len(), truth.len()),
        precision: ratio(recovered.len(), found.len()),
        mean_theta_error,
        top_gate_match,
        learned_significance: learned.significance,
        learned_depth: learned.depth().unwrap_or(0),
        truth_depth: gt.tree.depth().unwrap_or(0),
    }
}

impl fmt::Display for RecoveryReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "recall:           {:.4}", self.recall)?;
        writeln!(f, "precision:        {:.4}", self.precision)?;
        match self.mean_theta_error {
            Some(e) => writeln!(f, "mean theta error: {e:.6}")?,
            None => writeln!(f, "mean theta error: n/a")?,
        }
        writeln!(f, "top gate match:   {}", self.top_gate_match)?;
        writeln!(f, "significance:     {:.4}", self.learned_significance)?;
        writeln!(f, "depth:            {} (truth {})", self.learned_depth, self.truth_depth)?;
        writeln!(f, "recovered:        [{}]", self.recovered.join(", "))
    }
}

/// Marks every basic event of `tree` as firing with probability `p`.
/// Convenience for building ground truths in code.
pub fn with_basic_probability(mut tree: FaultTree, p: f64) -> FaultTree {
    for e in tree.events.iter_mut().filter(|e| e.kind == EventKind::Basic) {
        e.probability = Some(p);
    }
    tree
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::significance::GateType;
    use crate::threshold::Threshold;

    fn planted(name: &str) -> Threshold {
        Threshold {
            column: name.into(),
            sensor: name.into(),
            statistic: Statistic::Avg,
            theta: 50.0,
            gain: 1.0,
            failure_side: FailureSide::Gt,
        }
    }

    fn model() -> SensorModel {
        SensorModel {
            failure: (60.0, 80.0),
            normal: (10.0, 40.0),
        }
    }

    fn or_truth(p: [f64; 2], noise: f64) -> GroundTruth {
        let mut tree = FaultTree::new("fail", Some(Statistic::Avg), 3);
        let ids = tree
            .attach_gate(0, GateType::Or, vec![planted("a"), planted("b")], 1.0)
            .unwrap();
        tree.events[ids[0]].probability = Some(p[0]);
        tree.events[ids[1]].probability = Some(p[1]);
        GroundTruth {
            tree,
            sensor_models: [("a".to_string(), model()), ("b".to_string(), model())].into(),
            decoys: 3,
            decoy_range: (0.0, 100.0),
            label_noise: noise,
            n_units: 10,
            days_per_unit: 20,
            start_date: default_start(),
        }
    }

    #[test]
    fn forced_propagation() {
        let gt = or_truth([1.0, 0.0], 0.0);
        let d = generate(&gt, None, 3).unwrap();
        assert_eq!(d.len(), 200);
        assert!(d.failure("fail").unwrap().values.iter().all(|v| *v));
        let a = d.sensor("a").unwrap();
        assert!(a.values.iter().all(|v| (60.0..80.0).contains(&v.unwrap())));
        let b = d.sensor("b").unwrap();
        assert!(b.values.iter().all(|v| (10.0..40.0).contains(&v.unwrap())));
        assert_eq!(d.sensors().len(), 5);
    }

    #[test]
    fn seeded_determinism() {
        let gt = or_truth([0.3, 0.2], 0.05);
        assert_eq!(generate(&gt, Some(500), 9).unwrap(), generate(&gt, Some(500), 9).unwrap());
        assert_ne!(generate(&gt, Some(500), 9).unwrap(), generate(&gt, Some(500), 10).unwrap());
        // a prefix of a longer run is the shorter run
        let long = generate(&gt, Some(300), 4).unwrap();
        let short = generate(&gt, Some(100), 4).unwrap();
        assert_eq!(long.select_rows(&(0..100).collect::<Vec<_>>()), short);
    }

    #[test]
    fn zero_rows() {
        let d = generate(&or_truth([0.5, 0.5], 0.0), Some(0), 1).unwrap();
        assert!(d.is_empty());
    }

    #[test]
    fn rejects_bad_intervals() {
        let mut gt = or_truth([0.5, 0.5], 0.0);
        gt.sensor_models.get_mut("a").unwrap().normal = (40.0, 55.0);
        assert!(matches!(generate(&gt, None, 1), Err(Error::GroundTruth(_))));
        let mut gt = or_truth([0.5, 0.5], 0.0);
        gt.sensor_models.get_mut("b").unwrap().failure = (70.0, 60.0);
        assert!(gt.validate().is_err());
        let mut gt = or_truth([0.5, 0.5], 0.0);
        gt.label_noise = 0.5;
        assert!(gt.validate().is_err());
        let mut gt = or_truth([0.5, 0.5], 0.0);
        gt.sensor_models.remove("a");
        assert!(gt.validate().is_err());
    }

    #[test]
    fn json_roundtrip() {
        let gt = or_truth([0.25, 0.5], 0.01);
        assert_eq!(GroundTruth::from_json(&gt.to_json()).unwrap(), gt);
    }

    #[test]
    fn report_identity_and_disjoint() {
        let gt = or_truth([0.5, 0.5], 0.0);
        let r = recovery_report(&gt.tree, &gt);
        assert_eq!((r.recall, r.precision), (1.0, 1.0));
        assert_eq!(r.mean_theta_error, Some(0.0));
        assert!(r.top_gate_match);

        let mut other = FaultTree::new("fail", Some(Statistic::Avg), 3);
        other
            .attach_gate(0, GateType::And, vec![planted("x"), planted("y")], 0.4)
            .unwrap();
        let r = recovery_report(&other, &gt);
        assert_eq!(r.recall, 0.0);
        assert_eq!(r.precision, 0.0);
        assert_eq!(r.mean_theta_error, None);
        assert!(!r.top_gate_match);
    }

    #[test]
    fn report_with_decoy() {
        let gt = or_truth([0.5, 0.5], 0.0);
        let mut learned = FaultTree::new("fail", Some(Statistic::Avg), 3);
        let mut a = planted("a");
        a.theta = 52.0;
        learned
            .attach_gate(0, GateType::Or, vec![a, planted("b"), planted("decoy_00")], 0.9)
            .unwrap();
        let r = recovery_report(&learned, &gt);
        assert_eq!(r.recall, 1.0);
        assert!((r.precision - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(r.mean_theta_error, Some(1.0));
        assert!(r.top_gate_match);
    }
}
