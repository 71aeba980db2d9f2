#![allow(dead_code)]

use std::collections::BTreeMap;

use ftlearn::synthetic::{GroundTruth, SensorModel};
use ftlearn::{FailureSide, FaultTree, GateType, Statistic, Threshold};

pub const THETA: f64 = 50.0;

/// Planted sensor: GT sensors fail high, LEQ sensors fail low.
pub fn planted(name: &str, side: FailureSide) -> (Threshold, SensorModel) {
    let t = Threshold {
        column: name.to_string(),
        sensor: name.to_string(),
        statistic: Statistic::Avg,
        theta: THETA,
        gain: 1.0,
        failure_side: side,
    };
    let (high, low) = ((60.0, 100.0), (0.0, 40.0));
    let model = match side {
        FailureSide::Gt => SensorModel { failure: high, normal: low },
        FailureSide::Leq => SensorModel { failure: low, normal: high },
    };
    (t, model)
}

/// Builds a ground truth from `(parent event, gate type, inputs)` steps.
/// Inputs get event ids in order of appearance, starting at 1. Every
/// basic event fires with the probability listed in `probs`.
pub fn truth(
    steps: &[(usize, GateType, &[&str])],
    probs: &[(&str, f64)],
    noise: f64,
    rows: usize,
    decoys: usize,
) -> GroundTruth {
    let mut tree = FaultTree::new("failure", Some(Statistic::Avg), 3);
    let mut models = BTreeMap::new();
    for (i, (parent, gate, inputs)) in steps.iter().enumerate() {
        let vars: Vec<Threshold> = inputs
            .iter()
            .enumerate()
            .map(|(k, name)| {
                let side = if (i + k) % 2 == 0 { FailureSide::Gt } else { FailureSide::Leq };
                let (t, m) = planted(name, side);
                models.insert(name.to_string(), m);
                t
            })
            .collect();
        tree.attach_gate(*parent, *gate, vars, 1.0).unwrap();
    }
    let p: BTreeMap<&str, f64> = probs.iter().copied().collect();
    for e in tree.events.iter_mut().filter(|e| e.kind == ftlearn::EventKind::Basic) {
        e.probability = Some(p[e.variable.as_ref().unwrap().column.as_str()]);
    }
    let days = 50;
    GroundTruth {
        tree,
        sensor_models: models,
        decoys,
        decoy_range: (0.0, 100.0),
        label_noise: noise,
        n_units: rows.div_ceil(days),
        days_per_unit: days,
        start_date: chrono_start(),
    }
}

fn chrono_start() -> chrono::NaiveDate {
    chrono::NaiveDate::from_ymd_opt(2020, 1, 1).unwrap()
}

/// Exact failure probability (before label noise) by enumerating all basic
/// event states.
pub fn analytic_failure_probability(gt: &GroundTruth) -> f64 {
    let tree = &gt.tree;
    let basics: Vec<usize> = tree.basic_events().map(|e| e.id).collect();
    let mut total = 0.0;
    for mask in 0u32..(1 << basics.len()) {
        let mut state = vec![false; tree.events.len()];
        let mut weight = 1.0;
        for (k, &ev) in basics.iter().enumerate() {
            let on = mask >> k & 1 == 1;
            state[ev] = on;
            let p = tree.events[ev].probability.unwrap();
            weight *= if on { p } else { 1.0 - p };
        }
        // gates were attached top-down, so evaluate them in reverse
        for g in tree.gates.iter().rev() {
            let ins: Vec<bool> = g.inputs.iter().map(|&i| state[i]).collect();
            state[g.output] = match g.gate_type {
                GateType::And => ins.iter().all(|b| *b),
                GateType::Or => ins.iter().any(|b| *b),
            };
        }
        if state[tree.tle()] {
            total += weight;
        }
    }
    total
}
