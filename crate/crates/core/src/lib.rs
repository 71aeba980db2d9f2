//! Learning explainable static fault trees from sensor data.
//!
//! The pipeline has two stages. Each continuous sensor column is first
//! reduced to a Boolean condition by the information-gain-optimal threshold
//! against a failure column ([`threshold`]). The resulting conditions are
//! then assembled greedily into AND/OR gates scored by the phi coefficient
//! ([`learner`], [`significance`]), producing a [`FaultTree`] whose top
//! level event is the failure.
//!
//! ```no_run
//! use ftlearn::{ingest, learner, LearnerConfig, SchemaConfig, Statistic};
//!
//! let schema = SchemaConfig::load("schema.toml")?;
//! let data = ingest::deduplicate(&ingest::load_csv("data.csv", &schema)?);
//! let balanced = ingest::balance(&data, "lockout_11")?;
//! let config = LearnerConfig { statistic: Statistic::Range, ..Default::default() };
//! let learned = learner::learn(&balanced, &config)?;
//! println!("{}", learned.tree.to_dot(Default::default()));
//! # Ok::<(), ftlearn::Error>(())
//! ```

pub mod bits;
pub mod data;
pub mod error;
pub mod ingest;
pub mod learner;
pub mod significance;
pub mod synthetic;
pub mod threshold;
pub mod tree;

pub use bits::BitColumn;
pub use data::{class_proportions, Dataset, FailureColumn, RecordKey, SensorColumn, Statistic};
pub use error::{Error, Result};
pub use ingest::{BalancedDataset, SchemaConfig};
pub use learner::{best_gate_for, learn, learn_all, LearnerConfig};
pub use significance::{contingency, phi, ContingencyTable, GateCandidate, GateType};
pub use synthetic::{generate, recovery_report, GroundTruth, RecoveryReport, SensorModel};
pub use threshold::{discretize, entropy, find_optimal_threshold, gain, FailureSide, Threshold, ThresholdedVariable};
pub use tree::{DotOptions, Event, EventKind, FaultTree, Gate};
