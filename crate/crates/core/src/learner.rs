//! Greedy fault-tree construction.
//!
//! Starting from a tree holding only the failure as top level event, events
//! are expanded in FIFO order. Expanding an event searches every gate type
//! and every subset of 2..=`max_inputs` unused thresholded variables for the
//! expression best correlated (phi) with the event. The first gate must beat
//! `min_top_significance`; every later gate must be at least as significant
//! as the top gate. Accepted inputs join the frontier; the loop ends when the
//! frontier is empty or fewer than two variables remain unused.

use std::cmp::Ordering;
use std::collections::VecDeque;
use std::time::{Duration, Instant};

use itertools::Itertools;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bits::BitColumn;
use crate::data::{Dataset, Statistic};
use crate::error::{Error, Result};
use crate::ingest::{balance, BalancedDataset};
use crate::significance::{cmp_phi, phi, score_gate, GateCandidate, GateType};
use crate::threshold::{discretize, threshold_all, ThresholdReport, ThresholdedVariable};
use crate::tree::{EventId, FaultTree};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearnerConfig {
    pub max_inputs: usize,
    /// The top gate is accepted only if its significance is strictly above this.
    pub min_top_significance: f64,
    pub statistic: Statistic,
    /// Unused by the exhaustive search; recorded for reproducibility.
    pub random_seed: u64,
}

impl Default for LearnerConfig {
    fn default() -> Self {
        LearnerConfig {
            max_inputs: 3,
            min_top_significance: 0.0,
            statistic: Statistic::Min,
            random_seed: 0,
        }
    }
}

impl LearnerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_inputs < 2 {
            return Err(Error::Config(format!(
                "max_inputs must be at least 2, got {}",
                self.max_inputs
            )));
        }
        if !self.min_top_significance.is_finite() || !(-1.0..=1.0).contains(&self.min_top_significance) {
            return Err(Error::Config(format!(
                "min_top_significance must lie in [-1, 1], got {}",
                self.min_top_significance
            )));
        }
        Ok(())
    }
}

/// Result of one exhaustive gate search.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchOutcome {
    /// Best gate; `inputs` index into the candidate slice, ordered by name.
    pub best: Option<GateCandidate>,
    /// Number of (type, subset) pairs scored.
    pub evaluations: usize,
}

/// Number of gates scored for `m` candidates: 2·Σ_{k=2}^{max_inputs} C(m, k).
pub fn evaluation_count(m: usize, max_inputs: usize) -> usize {
    let binom = |n: usize, k: usize| -> usize {
        if k > n {
            return 0;
        }
        (0..k).fold(1usize, |acc, i| acc * (n - i) / (i + 1))
    };
    2 * (2..=max_inputs).map(|k| binom(m, k)).sum::<usize>()
}

/// Canonical preference between two scored gates: higher significance
/// (compared exactly on the contingency tables),
/// then AND before OR, then fewer inputs, then lexicographically smaller
/// input names. `Less` means `a` is preferred.
pub fn gate_order(a: &GateCandidate, b: &GateCandidate, names: &dyn Fn(usize) -> String) -> Ordering {
    cmp_phi(&b.table, &a.table)
        .then(a.gate_type.cmp(&b.gate_type))
        .then(a.inputs.len().cmp(&b.inputs.len()))
        .then_with(|| {
            let la = a.inputs.iter().map(|&i| names(i));
            let lb = b.inputs.iter().map(|&i| names(i));
            la.cmp(lb)
        })
}

/// Scores every gate type over every subset of 2..=`max_inputs`
/// candidates against `output` and returns the best one.
///
/// Subsets are scored in parallel. The reduction uses [`gate_order`], a
/// total order, so the winner does not depend on scheduling.
pub fn best_gate_for(output: &BitColumn, candidates: &[&ThresholdedVariable], max_inputs: usize) -> SearchOutcome {
    let m = candidates.len();
    if m < 2 || max_inputs < 2 {
        return SearchOutcome {
            best: None,
            evaluations: 0,
        };
    }
    let mut by_name: Vec<usize> = (0..m).collect();
    by_name.sort_by(|&a, &b| candidates[a].name().cmp(candidates[b].name()));

    let subsets: Vec<Vec<usize>> = (2..=max_inputs.min(m))
        .flat_map(|k| by_name.iter().copied().combinations(k))
        .collect();
    let jobs: Vec<(GateType, &Vec<usize>)> = subsets
        .iter()
        .flat_map(|s| GateType::ALL.into_iter().map(move |g| (g, s)))
        .collect();

    let names = |i: usize| candidates[i].name().to_string();
    let best = jobs
        .par_iter()
        .map(|&(gate_type, subset)| {
            let cols: Vec<&BitColumn> = subset.iter().map(|&i| &candidates[i].values).collect();
            let table = score_gate(gate_type, &cols, output);
            GateCandidate {
                gate_type,
                inputs: subset.clone(),
                significance: phi(&table),
                table,
            }
        })
        .reduce_with(|a, b| match gate_order(&a, &b, &names) {
            Ordering::Greater => b,
            _ => a,
        });
    SearchOutcome {
        best,
        evaluations: jobs.len(),
    }
}

/// A learned tree plus the intermediate products of the run.
#[derive(Debug, Clone)]
pub struct Learned {
    pub tree: FaultTree,
    pub thresholds: ThresholdReport,
    /// Total gates scored across all expansions.
    pub evaluations: usize,
    pub expansions: usize,
}

pub fn learn(data: &BalancedDataset, config: &LearnerConfig) -> Result<Learned> {
    config.validate()?;
    let thresholds = threshold_all(data, config.statistic);
    if thresholds.thresholds.len() < 2 {
        return Err(Error::InsufficientVariables(thresholds.thresholds.len()));
    }
    let vars: Vec<ThresholdedVariable> = thresholds
        .thresholds
        .iter()
        .map(|t| {
            let sensor = data
                .data
                .sensor(&t.column)
                .ok_or_else(|| Error::UnknownColumn(t.column.clone()))?;
            discretize(sensor, t)
        })
        .collect::<Result<_>>()?;
    let tle_column = BitColumn::from_bools(&data.failure_column().values);

    let mut tree = FaultTree::new(&data.failure, Some(config.statistic), config.max_inputs);
    let tle = tree.tle();
    let mut unused: Vec<usize> = (0..vars.len()).collect();
    // (event, index of its variable; None for the TLE)
    let mut frontier: VecDeque<(EventId, Option<usize>)> = VecDeque::from([(tle, None)]);
    let mut evaluations = 0;
    let mut expansions = 0;

    while let Some((event, var)) = frontier.pop_front() {
        if unused.len() < 2 {
            break;
        }
        let output = var.map_or(&tle_column, |v| &vars[v].values);
        let candidates: Vec<&ThresholdedVariable> = unused.iter().map(|&i| &vars[i]).collect();
        let outcome = best_gate_for(output, &candidates, config.max_inputs);
        evaluations += outcome.evaluations;
        expansions += 1;
        let Some(gate) = outcome.best else { continue };

        let accept = if event == tle {
            gate.significance > config.min_top_significance
        } else {
            gate.significance >= tree.significance
        };
        if !accept {
            continue;
        }
        let chosen: Vec<usize> = gate.inputs.iter().map(|&c| unused[c]).collect();
        let ids = tree.attach_gate(
            event,
            gate.gate_type,
            chosen.iter().map(|&v| vars[v].threshold.clone()).collect(),
            gate.significance,
        )?;
        unused.retain(|v| !chosen.contains(v));
        frontier.extend(ids.into_iter().zip(chosen.into_iter().map(Some)));
    }

    if tree.gates.is_empty() {
        return Err(Error::NoSignificantStructure);
    }
    let tree = tree.annotate_probabilities(&data.data)?;
    Ok(Learned {
        tree,
        thresholds,
        evaluations,
        expansions,
    })
}

/// One (failure, statistic) learning attempt.
#[derive(Debug, Clone)]
pub struct Attempt {
    pub failure: String,
    pub statistic: Statistic,
    /// The tree, or the reason no tree was produced.
    pub outcome: std::result::Result<FaultTree, String>,
    pub runtime: Duration,
}

/// Learns one tree per failure column and statistic. Errors become skip
/// reasons. Attempts run in parallel; the result is sorted by failure name,
/// then statistic.
pub fn learn_all(data: &Dataset, config: &LearnerConfig, statistics: &[Statistic]) -> Vec<Attempt> {
    let mut failures: Vec<&str> = data.failures().iter().map(|f| f.name.as_str()).collect();
    failures.sort_unstable();
    let mut stats = statistics.to_vec();
    stats.sort_unstable();
    stats.dedup();

    let balanced: Vec<(&str, std::result::Result<BalancedDataset, String>)> = failures
        .par_iter()
        .map(|&f| (f, balance(data, f).map_err(|e| e.to_string())))
        .collect();

    let jobs: Vec<(&str, &std::result::Result<BalancedDataset, String>, Statistic)> = balanced
        .iter()
        .flat_map(|(f, b)| stats.iter().map(move |&s| (*f, b, s)))
        .collect();

    jobs.par_iter()
        .map(|&(failure, balanced, statistic)| {
            let start = Instant::now();
            let outcome = match balanced {
                Ok(b) => {
                    let cfg = LearnerConfig {
                        statistic,
                        ..config.clone()
                    };
                    learn(b, &cfg).map(|l| l.tree).map_err(|e| e.to_string())
                }
                Err(reason) => Err(reason.clone()),
            };
            Attempt {
                failure: failure.to_string(),
                statistic,
                outcome,
                runtime: start.elapsed(),
            }
        })
        .collect()
}
