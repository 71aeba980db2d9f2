mod common;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{analytic_failure_probability, truth};
use ftlearn::error::Error;
use ftlearn::learner::{evaluation_count, Attempt};
use ftlearn::{ingest, FailureColumn, learn, learn_all, recovery_report, synthetic, GateType, LearnerConfig, Statistic};

fn config() -> LearnerConfig {
    LearnerConfig { statistic: Statistic::Avg, ..Default::default() }
}

#[test]
fn recovers_planted_or() {
    let gt = truth(&[(0, GateType::Or, &["a", "b"])], &[("a", 0.3), ("b", 0.3)], 0.0, 4000, 10);
    let data = synthetic::generate(&gt, None, 7).unwrap();
    let balanced = ingest::balance(&data, "failure").unwrap();
    let learned = learn(&balanced, &config()).unwrap();
    let top = learned.tree.top_gate().unwrap();
    assert_eq!(top.gate_type, GateType::Or);
    assert_eq!(learned.tree.significance, 1.0);
    let report = recovery_report(&learned.tree, &gt);
    assert_eq!(report.recall, 1.0);
    assert_eq!(report.precision, 1.0);
    assert!(report.top_gate_match);
}

#[test]
fn recovers_planted_and() {
    let gt = truth(&[(0, GateType::And, &["a", "b"])], &[("a", 0.5), ("b", 0.5)], 0.0, 4000, 10);
    let data = synthetic::generate(&gt, None, 11).unwrap();
    let balanced = ingest::balance(&data, "failure").unwrap();
    let learned = learn(&balanced, &config()).unwrap();
    assert_eq!(learned.tree.top_gate().unwrap().gate_type, GateType::And);
    assert_eq!(learned.tree.significance, 1.0);
    assert!(recovery_report(&learned.tree, &gt).top_gate_match);
}

#[test]
fn recovers_nested_gate_under_noise() {
    // With noise-free labels the top gate scores exactly 1 and the child
    // gate, whose thresholds are fitted against the failure rather than
    // its parent, can only tie that by luck. Mild noise lowers the top.
    let gt = truth(
        &[(0, GateType::Or, &["a", "b"]), (1, GateType::And, &["c", "d"])],
        &[("b", 0.2), ("c", 0.5), ("d", 0.5)],
        0.01,
        5000,
        6,
    );
    let data = synthetic::generate(&gt, None, 3).unwrap();
    let balanced = ingest::balance(&data, "failure").unwrap();
    let learned = learn(&balanced, &config()).unwrap();
    let report = recovery_report(&learned.tree, &gt);
    assert_eq!(report.recall, 1.0, "{report}");
    assert_eq!(learned.tree.depth().unwrap(), 2);
    learned.tree.validate().unwrap();
}

#[test]
fn learning_is_deterministic() {
    let gt = truth(&[(0, GateType::Or, &["a", "b"])], &[("a", 0.3), ("b", 0.3)], 0.05, 3000, 8);
    let data = synthetic::generate(&gt, None, 99).unwrap();
    let balanced = ingest::balance(&data, "failure").unwrap();
    let a = learn(&balanced, &config()).unwrap().tree;
    let b = learn(&balanced, &config()).unwrap().tree;
    assert_eq!(a.to_json(), b.to_json());
    assert_eq!(a.to_dot(Default::default()), b.to_dot(Default::default()));
}

#[test]
fn independent_labels_yield_no_tree() {
    let gt = truth(&[(0, GateType::Or, &["a", "b"])], &[("a", 0.3), ("b", 0.3)], 0.0, 4000, 10);
    let data = synthetic::generate(&gt, None, 5).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let coin = FailureColumn::new("failure", (0..data.len()).map(|_| rng.gen_bool(0.3)).collect());
    let data = ftlearn::Dataset::new(data.keys().to_vec(), data.sensors().to_vec(), vec![coin]).unwrap();
    let balanced = ingest::balance(&data, "failure").unwrap();
    let cfg = LearnerConfig { min_top_significance: 0.3, ..config() };
    assert!(matches!(learn(&balanced, &cfg), Err(Error::NoSignificantStructure)));
}

#[test]
fn evaluations_match_enumeration_count() {
    let gt = truth(&[(0, GateType::Or, &["a", "b"])], &[("a", 0.3), ("b", 0.3)], 0.0, 2000, 4);
    let data = synthetic::generate(&gt, None, 1).unwrap();
    let balanced = ingest::balance(&data, "failure").unwrap();
    let learned = learn(&balanced, &config()).unwrap();
    // six variables: top gate sees 6, then a and b each see the 4 unused decoys
    let expected = evaluation_count(6, 3) + 2 * evaluation_count(4, 3);
    assert_eq!(learned.evaluations, expected);
    assert_eq!(evaluation_count(6, 3), 2 * (15 + 20));
}

#[test]
fn learn_all_covers_every_failure_and_statistic() {
    let gt = truth(&[(0, GateType::Or, &["a", "b"])], &[("a", 0.3), ("b", 0.3)], 0.0, 2000, 3);
    let data = synthetic::generate(&gt, None, 2).unwrap();
    let mut failures = data.failures().to_vec();
    let mut other = failures[0].clone();
    other.name = "failure_copy".into();
    failures.push(other);
    let data = ftlearn::Dataset::new(data.keys().to_vec(), data.sensors().to_vec(), failures).unwrap();
    let attempts = learn_all(&data, &config(), &Statistic::ALL);
    assert_eq!(attempts.len(), 8);
    let names: Vec<(&str, Statistic)> = attempts.iter().map(|a| (a.failure.as_str(), a.statistic)).collect();
    let mut sorted = names.clone();
    sorted.sort_by(|x, y| x.0.cmp(y.0).then(x.1.cmp(&y.1)));
    assert_eq!(names, sorted);
    // every sensor here is tagged avg, so only avg attempts can succeed
    let ok: Vec<&Attempt> = attempts.iter().filter(|a| a.outcome.is_ok()).collect();
    assert_eq!(ok.len(), 2);
    assert!(ok.iter().all(|a| a.statistic == Statistic::Avg));
}

#[test]
fn learn_all_skips_degenerate_failure() {
    let gt = truth(&[(0, GateType::Or, &["a", "b"])], &[("a", 0.3), ("b", 0.3)], 0.0, 2000, 3);
    let data = synthetic::generate(&gt, None, 2).unwrap();
    let mut failures = data.failures().to_vec();
    let mut never = failures[0].clone();
    never.name = "never".into();
    never.values.iter_mut().for_each(|v| *v = false);
    failures.push(never);
    let data = ftlearn::Dataset::new(data.keys().to_vec(), data.sensors().to_vec(), failures).unwrap();
    let attempts = learn_all(&data, &config(), &[Statistic::Avg]);
    assert_eq!(attempts.len(), 2);
    let skipped: Vec<&Attempt> = attempts.iter().filter(|a| a.outcome.is_err()).collect();
    assert_eq!(skipped.len(), 1);
    assert_eq!(skipped[0].failure, "never");
    assert!(skipped[0].outcome.as_ref().unwrap_err().contains("no positive examples"));
}

#[test]
fn empirical_failure_rate_matches_enumeration() {
    let gt = truth(
        &[(0, GateType::Or, &["a", "b"]), (1, GateType::And, &["c", "d"])],
        &[("b", 0.2), ("c", 0.5), ("d", 0.4)],
        0.0,
        100_000,
        0,
    );
    let p = analytic_failure_probability(&gt);
    assert!((p - (1.0 - 0.8 * 0.8)).abs() < 1e-12);
    let data = synthetic::generate(&gt, None, 21).unwrap();
    let n = data.len() as f64;
    let hits = data.failure("failure").unwrap().values.iter().filter(|v| **v).count() as f64;
    let sigma = (p * (1.0 - p) / n).sqrt();
    assert!((hits / n - p).abs() <= 3.0 * sigma, "{} vs {p}", hits / n);
}

#[test]
fn label_noise_shifts_rate_as_expected() {
    let gt = truth(&[(0, GateType::And, &["a", "b"])], &[("a", 0.5), ("b", 0.5)], 0.1, 100_000, 0);
    let p = analytic_failure_probability(&gt);
    let q = p * 0.9 + (1.0 - p) * 0.1;
    let data = synthetic::generate(&gt, None, 8).unwrap();
    let n = data.len() as f64;
    let hits = data.failure("failure").unwrap().values.iter().filter(|v| **v).count() as f64;
    let sigma = (q * (1.0 - q) / n).sqrt();
    assert!((hits / n - q).abs() <= 3.0 * sigma);
}

#[test]
fn generation_is_reproducible() {
    let gt = truth(&[(0, GateType::Or, &["a", "b"])], &[("a", 0.3), ("b", 0.3)], 0.02, 500, 2);
    let a = synthetic::generate(&gt, None, 4).unwrap();
    let b = synthetic::generate(&gt, None, 4).unwrap();
    let c = synthetic::generate(&gt, None, 5).unwrap();
    assert_eq!(a, b);
    assert_ne!(a, c);
}
