// SPDX-License-Identifier: Apache-2.0

//! Skew-robust load balancing for blocking-based entity resolution.
//!
//! Entities sharing a blocking key form a block, and every pair inside a
//! block has to be compared. With skewed keys a handful of blocks carry most
//! of the pairs, and routing each block to one reduce task leaves a few
//! tasks doing nearly all the work. This crate runs the comparison phase on
//! a small deterministic MapReduce engine with three strategies:
//!
//! * [`StrategyKind::Basic`]: hash the blocking key, whole block per task.
//! * [`StrategyKind::BlockSplit`]: split large blocks along the input
//!   partitions and schedule the resulting match tasks largest first.
//! * [`StrategyKind::PairRange`]: number all pairs and give each reduce task
//!   one contiguous, equally sized range.
//!
//! Both balancing strategies plan from a [`BlockDistributionMatrix`]
//! computed by a preceding analysis job.

pub mod bdm;
pub mod datagen;
pub mod engine;
pub mod error;
pub mod matching;
pub mod model;
pub mod report;
pub mod strategy;

#[cfg(test)]
mod testutil;

pub use bdm::{average_workload, compute_bdm, BlockDistributionMatrix};
pub use datagen::{generate, load_csv, write_csv, GenSpec, Layout};
pub use engine::{hash_partition, run_job, CompositeKey, JobConfig, TaskMetrics};
pub use error::{Error, Result};
pub use matching::{compare, MatchDecision, MatcherConfig, MatcherKind};
pub use model::{canonical_block_order, enumerate_block_pairs, pairs_in_block, Block, Dataset, Entity, Pair};
pub use report::{bench_sweep, imbalance, run, simulated_makespan, RunConfig, RunOptions, RunReport};
pub use strategy::{run_matching, Comparison, MatchRun, Retain, StrategyKind};
