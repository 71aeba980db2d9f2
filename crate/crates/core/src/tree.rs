//! Static fault trees over thresholded sensor conditions.
//!
//! A tree is stored as flat event and gate lists. Event 0 is the top level
//! event (the failure being explained); every other event is a thresholded
//! sensor condition. Each gate names one output event and its input events.
//! Events that are not the output of any gate are basic events.
//!
//! The JSON form mirrors these structs directly:
//!
//! ```json
//! {
//!   "format_version": 1,
//!   "failure": "warning_low_t1",
//!   "statistic": "min",
//!   "max_inputs": 3,
//!   "significance": 0.96,
//!   "events": [
//!     { "id": 0, "kind": "tle", "label": "warning_low_t1" },
//!     { "id": 1, "kind": "basic", "label": "min(s1_temp) ≤ 0.0",
//!       "variable": { "column": "s1_temp_min", "sensor": "s1_temp",
//!                     "statistic": "min", "theta": 0.0, "gain": 0.86,
//!                     "failure_side": "LEQ" },
//!       "probability": 0.48 }
//!   ],
//!   "gates": [ { "type": "OR", "output": 0, "inputs": [1, 2], "significance": 0.96 } ]
//! }
//! ```

use std::collections::HashSet;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Statistic};
use crate::error::{Error, Result};
use crate::significance::GateType;
use crate::threshold::{discretize, Threshold};

pub const FORMAT_VERSION: u32 = 1;

pub type EventId = usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EventKind {
    Tle,
    Basic,
    Intermediate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Event {
    pub id: EventId,
    pub kind: EventKind,
    pub label: String,
    /// Thresholded sensor behind the event; absent only on the TLE.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub variable: Option<Threshold>,
    /// Occurrence probability, set on basic events.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub probability: Option<f64>,
}

fn full_significance() -> f64 {
    1.0
}

fn default_max_inputs() -> usize {
    3
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Gate {
    #[serde(rename = "type")]
    pub gate_type: GateType,
    pub output: EventId,
    pub inputs: Vec<EventId>,
    #[serde(default = "full_significance")]
    pub significance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FaultTree {
    pub format_version: u32,
    pub failure: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub statistic: Option<Statistic>,
    #[serde(default = "default_max_inputs")]
    pub max_inputs: usize,
    #[serde(default = "full_significance")]
    pub significance: f64,
    pub events: Vec<Event>,
    #[serde(default)]
    pub gates: Vec<Gate>,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct DotOptions {
    /// Print each thresholded event's gain under its label.
    pub show_gain: bool,
}

fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidTree(msg.into())
}

impl FaultTree {
    /// Tree holding only the top level event.
    pub fn new(failure: impl Into<String>, statistic: Option<Statistic>, max_inputs: usize) -> Self {
        let failure = failure.into();
        FaultTree {
            format_version: FORMAT_VERSION,
            events: vec![Event {
                id: 0,
                kind: EventKind::Tle,
                label: failure.clone(),
                variable: None,
                probability: None,
            }],
            failure,
            statistic,
            max_inputs,
            significance: 0.0,
            gates: Vec::new(),
        }
    }

    pub fn tle(&self) -> EventId {
        self.events
            .iter()
            .position(|e| e.kind == EventKind::Tle)
            .unwrap_or(0)
    }

    pub fn gate_producing(&self, event: EventId) -> Option<&Gate> {
        self.gates.iter().find(|g| g.output == event)
    }

    pub fn top_gate(&self) -> Option<&Gate> {
        self.gate_producing(self.tle())
    }

    pub fn basic_events(&self) -> impl Iterator<Item = &Event> {
        self.events.iter().filter(|e| e.kind == EventKind::Basic)
    }

    /// Thresholded variables placed in the tree, in event order.
    pub fn variables(&self) -> impl Iterator<Item = &Threshold> {
        self.events.iter().filter_map(|e| e.variable.as_ref())
    }

    /// Attaches a gate below `output` whose inputs are new basic events for
    /// `inputs`. Returns the new event ids. The tree is unchanged on error.
    pub fn attach_gate(
        &mut self,
        output: EventId,
        gate_type: GateType,
        inputs: Vec<Threshold>,
        significance: f64,
    ) -> Result<Vec<EventId>> {
        if output >= self.events.len() {
            return Err(invalid(format!("no event {output}")));
        }
        let mut next = self.clone();
        let start = next.events.len();
        let ids: Vec<EventId> = (start..start + inputs.len()).collect();
        for (id, t) in ids.iter().zip(inputs) {
            next.events.push(Event {
                id: *id,
                kind: EventKind::Basic,
                label: t.label(),
                variable: Some(t),
                probability: None,
            });
        }
        if next.events[output].kind == EventKind::Tle {
            next.significance = significance;
        } else {
            next.events[output].kind = EventKind::Intermediate;
            next.events[output].probability = None;
        }
        next.gates.push(Gate {
            gate_type,
            output,
            inputs: ids.clone(),
            significance,
        });
        next.validate()?;
        *self = next;
        Ok(ids)
    }

    /// Checks every structural invariant:
    /// one TLE, ids match positions, each gate has 2..=max_inputs inputs,
    /// every event except the TLE feeds exactly one gate and everything is
    /// reachable from the TLE without cycles, each sensor column appears at
    /// most once, kinds agree with the gate structure, and no gate is less
    /// significant than the top gate, whose significance is the tree's.
    pub fn validate(&self) -> Result<()> {
        if self.format_version != FORMAT_VERSION {
            return Err(invalid(format!("unsupported format_version {}", self.format_version)));
        }
        if self.max_inputs < 2 {
            return Err(invalid("max_inputs must be at least 2"));
        }
        let n = self.events.len();
        for (i, e) in self.events.iter().enumerate() {
            if e.id != i {
                return Err(invalid(format!("event at position {i} has id {}", e.id)));
            }
            if let Some(p) = e.probability {
                if !(0.0..=1.0).contains(&p) {
                    return Err(invalid(format!("event {i} probability {p} outside [0, 1]")));
                }
            }
        }
        let tles: Vec<EventId> = (0..n).filter(|&i| self.events[i].kind == EventKind::Tle).collect();
        let tle = match tles.as_slice() {
            [t] => *t,
            other => return Err(invalid(format!("expected one TLE, found {}", other.len()))),
        };
        if self.events[tle].variable.is_some() {
            return Err(invalid("TLE must not carry a sensor variable"));
        }
        if self.gates.is_empty() {
            return Err(Error::EmptyTree);
        }

        let mut producer: Vec<Option<usize>> = vec![None; n];
        let mut consumer: Vec<Option<usize>> = vec![None; n];
        for (gi, g) in self.gates.iter().enumerate() {
            if g.inputs.len() < 2 || g.inputs.len() > self.max_inputs {
                return Err(invalid(format!(
                    "gate {gi} has {} inputs, allowed 2..={}",
                    g.inputs.len(),
                    self.max_inputs
                )));
            }
            if !g.significance.is_finite() || !(-1.0..=1.0).contains(&g.significance) {
                return Err(invalid(format!("gate {gi} significance {} outside [-1, 1]", g.significance)));
            }
            if g.output >= n {
                return Err(invalid(format!("gate {gi} output {} out of range", g.output)));
            }
            if producer[g.output].replace(gi).is_some() {
                return Err(invalid(format!("event {} is the output of two gates", g.output)));
            }
            for &i in &g.inputs {
                if i >= n {
                    return Err(invalid(format!("gate {gi} input {i} out of range")));
                }
                if i == tle {
                    return Err(invalid(format!("gate {gi} uses the TLE as input")));
                }
                if consumer[i].replace(gi).is_some() {
                    return Err(invalid(format!("event {i} feeds more than one gate")));
                }
            }
        }

        for (i, e) in self.events.iter().enumerate() {
            if i == tle {
                continue;
            }
            if consumer[i].is_none() {
                return Err(invalid(format!("event {i} is not connected to any gate")));
            }
            if e.variable.is_none() {
                return Err(invalid(format!("event {i} has no sensor variable")));
            }
            let expected = if producer[i].is_some() {
                EventKind::Intermediate
            } else {
                EventKind::Basic
            };
            if e.kind != expected {
                return Err(invalid(format!("event {i} is {:?} but should be {expected:?}", e.kind)));
            }
        }

        // walk down from the TLE; revisiting an event means a cycle
        let mut seen = vec![false; n];
        let mut stack = vec![tle];
        let mut reached_gates = 0;
        while let Some(ev) = stack.pop() {
            if std::mem::replace(&mut seen[ev], true) {
                return Err(invalid(format!("cycle through event {ev}")));
            }
            if let Some(gi) = producer[ev] {
                reached_gates += 1;
                stack.extend(&self.gates[gi].inputs);
            }
        }
        if let Some(i) = seen.iter().position(|s| !s) {
            return Err(invalid(format!("event {i} is not reachable from the TLE")));
        }
        if reached_gates != self.gates.len() {
            return Err(invalid("some gates are not reachable from the TLE"));
        }

        let mut columns = HashSet::new();
        for t in self.variables() {
            if !columns.insert(t.column.as_str()) {
                return Err(invalid(format!("sensor variable `{}` used more than once", t.column)));
            }
        }

        let top = &self.gates[producer[tle].expect("validated non-empty")];
        if self.significance != top.significance {
            return Err(invalid(format!(
                "tree significance {} differs from top gate significance {}",
                self.significance, top.significance
            )));
        }
        if let Some((gi, g)) = self
            .gates
            .iter()
            .enumerate()
            .find(|(_, g)| g.significance < top.significance)
        {
            return Err(invalid(format!(
                "gate {gi} significance {} below top gate significance {}",
                g.significance, top.significance
            )));
        }
        Ok(())
    }

    /// Number of gates on the longest path from the TLE to a basic event.
    pub fn depth(&self) -> Result<usize> {
        if self.gates.is_empty() {
            return Err(Error::EmptyTree);
        }
        fn down(t: &FaultTree, ev: EventId, budget: usize) -> usize {
            match t.gate_producing(ev) {
                // budget bounds recursion on malformed (cyclic) input
                Some(g) if budget > 0 => 1 + g.inputs.iter().map(|&i| down(t, i, budget - 1)).max().unwrap_or(0),
                _ => 0,
            }
        }
        Ok(down(self, self.tle(), self.gates.len()))
    }

    /// Sets each basic event's probability to the fraction of rows where its
    /// condition holds, among rows where the sensor is present.
    pub fn annotate_probabilities(&self, data: &Dataset) -> Result<FaultTree> {
        let mut out = self.clone();
        for e in out.events.iter_mut().filter(|e| e.kind == EventKind::Basic) {
            let t = e
                .variable
                .as_ref()
                .ok_or_else(|| invalid(format!("basic event {} has no sensor variable", e.id)))?;
            let sensor = data
                .sensor(&t.column)
                .ok_or_else(|| Error::UnknownColumn(t.column.clone()))?;
            let tv = discretize(sensor, t)?;
            let valid = tv.values.count_valid();
            if valid == 0 {
                return Err(Error::NoUsableRows);
            }
            e.probability = Some(tv.values.count_ones() as f64 / valid as f64);
        }
        Ok(out)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("fault tree serializes")
    }

    pub fn from_json(text: &str) -> Result<FaultTree> {
        let tree: FaultTree = serde_json::from_str(text)?;
        tree.validate()?;
        Ok(tree)
    }

    /// Graphviz rendering. Node and edge order follow event and gate order,
    /// so equal trees render to identical text.
    pub fn to_dot(&self, opts: DotOptions) -> String {
        let mut out = String::new();
        let name = escape(&self.failure);
        writeln!(out, "digraph \"{name}\" {{").unwrap();
        writeln!(out, "  rankdir=BT;").unwrap();
        writeln!(out, "  node [fontname=\"Helvetica\"];").unwrap();
        for e in &self.events {
            let (shape, mut label) = match e.kind {
                EventKind::Tle => ("house", e.label.clone()),
                EventKind::Intermediate => ("ellipse", e.label.clone()),
                EventKind::Basic => ("circle", e.label.clone()),
            };
            if opts.show_gain {
                if let Some(t) = &e.variable {
                    write!(label, "\ngain={:.2}", t.gain).unwrap();
                }
            }
            if let Some(p) = e.probability {
                write!(label, "\np={p:.3}").unwrap();
            }
            writeln!(out, "  e{} [shape={shape}, label=\"{}\"];", e.id, escape(&label)).unwrap();
        }
        for (gi, g) in self.gates.iter().enumerate() {
            writeln!(
                out,
                "  g{gi} [shape=box, label=\"{}\\n{:.2}\"];",
                g.gate_type, g.significance
            )
            .unwrap();
        }
        for (gi, g) in self.gates.iter().enumerate() {
            for i in &g.inputs {
                writeln!(out, "  e{i} -> g{gi};").unwrap();
            }
            writeln!(out, "  g{gi} -> e{};", g.output).unwrap();
        }
        out.push_str("}\n");
        out
    }
}

fn escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"").replace('\n', "\\n")
}
