//! Multi-objective learning with pseudo-labeling.
//!
//! Learners for scalarized multi-task trade-offs (`mol`), the losses and
//! scalarizations they rely on, hypothesis classes with projections, a
//! constrained first-order solver, exact population oracles, Rademacher
//! complexity estimators and the experiment harness behind the `moltk` CLI.

#![allow(clippy::neg_cmp_op_on_partial_ord)] // `!(x > 0.0)` also rejects NaN

pub mod bench;
pub mod complexity;
pub mod data;
pub mod error;
pub mod exec;
pub mod hypclass;
pub mod losses;
pub mod mol;
pub mod numeric;
pub mod oracle;
pub mod rng;
pub mod scalarize;
pub mod solve;

pub use data::{MultiTaskData, Sample, TaskData, Tolerances};
pub use error::{MolError, Result};
pub use exec::Execution;
pub use hypclass::{HypothesisClass, Model};
pub use losses::{BregmanLoss, TaskLoss};
pub use scalarize::{Scalarization, ScalarizationKind, WeightVector};
