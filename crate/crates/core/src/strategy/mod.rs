// SPDX-License-Identifier: Apache-2.0

//! Match jobs: the three ways of spreading within-block comparisons over
//! reduce tasks, and the shared comparison path they all report through.

pub mod basic;
pub mod blocksplit;
pub mod pairrange;

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::bdm::BlockDistributionMatrix;
use crate::engine::{run_job, JobConfig, ReduceContext, TaskMetrics};
use crate::error::{Error, Result};
use crate::matching::{compare, CostModel, MatchDecision, MatcherConfig, UnitCost};
use crate::model::{Dataset, Entity};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StrategyKind {
    Basic,
    BlockSplit,
    PairRange,
}

impl StrategyKind {
    pub const ALL: [StrategyKind; 3] = [
        StrategyKind::Basic,
        StrategyKind::BlockSplit,
        StrategyKind::PairRange,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            StrategyKind::Basic => "basic",
            StrategyKind::BlockSplit => "blocksplit",
            StrategyKind::PairRange => "pairrange",
        }
    }
}

impl fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for StrategyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "basic" => Ok(StrategyKind::Basic),
            "blocksplit" => Ok(StrategyKind::BlockSplit),
            "pairrange" => Ok(StrategyKind::PairRange),
            other => Err(Error::InvalidArgument(format!("unknown strategy {other:?}"))),
        }
    }
}

/// Which match decisions a job keeps in its output.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Retain {
    /// Every compared pair.
    All,
    #[default]
    Matches,
    /// Metrics only.
    Nothing,
}

/// Broadcast comparison settings shared by every strategy's reducer.
#[derive(Clone)]
pub struct Comparison {
    pub matcher: MatcherConfig,
    pub cost: Arc<dyn CostModel>,
    pub retain: Retain,
}

impl fmt::Debug for Comparison {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Comparison")
            .field("matcher", &self.matcher)
            .field("retain", &self.retain)
            .finish_non_exhaustive()
    }
}

impl Comparison {
    pub fn new(matcher: MatcherConfig, retain: Retain) -> Self {
        Self {
            matcher,
            cost: Arc::new(UnitCost),
            retain,
        }
    }

    pub fn sink<'a>(&'a self, ctx: &'a mut ReduceContext<MatchDecision>) -> PairSink<'a> {
        PairSink { settings: self, ctx }
    }
}

/// The only way a reducer performs a comparison; it runs the matcher and
/// updates the task metrics.
pub struct PairSink<'a> {
    settings: &'a Comparison,
    ctx: &'a mut ReduceContext<MatchDecision>,
}

impl PairSink<'_> {
    /// Compares two entities, `a` first in canonical block order.
    pub fn compare(&mut self, a: &Entity, b: &Entity) {
        let decision = compare(a, b, &self.settings.matcher);
        self.ctx.record_comparison(self.settings.cost.cost(a, b));
        let keep = match self.settings.retain {
            Retain::All => true,
            Retain::Matches => decision.is_match,
            Retain::Nothing => false,
        };
        if keep {
            self.ctx.emit(decision);
        }
    }
}

/// Result of a match job.
#[derive(Debug)]
pub struct MatchRun {
    pub strategy: StrategyKind,
    /// Retained decisions per reduce task.
    pub decisions: Vec<Vec<MatchDecision>>,
    pub metrics: Vec<TaskMetrics>,
    pub shuffled_records: u64,
}

impl MatchRun {
    pub fn total_comparisons(&self) -> u64 {
        self.metrics.iter().map(|m| m.comparisons_done).sum()
    }

    pub fn comparisons_per_task(&self) -> Vec<u64> {
        self.metrics.iter().map(|m| m.comparisons_done).collect()
    }
}

/// Runs the matching job of one strategy on a dataset whose BDM has
/// already been computed.
pub fn run_matching(
    dataset: &Dataset,
    bdm: &Arc<BlockDistributionMatrix>,
    strategy: StrategyKind,
    comparison: &Comparison,
    config: &JobConfig,
) -> Result<MatchRun> {
    config.validate()?;
    if bdm.m != config.m || dataset.m() != config.m {
        return Err(Error::InvalidArgument(format!(
            "partition counts disagree: dataset {}, BDM {}, job {}",
            dataset.m(),
            bdm.m,
            config.m
        )));
    }
    let out = match strategy {
        StrategyKind::Basic => {
            let mapper = basic::BasicMapper { r: config.r };
            let reducer = basic::BasicReducer {
                comparison: comparison.clone(),
            };
            run_job(&mapper, &reducer, dataset.partitions(), config)?
        }
        StrategyKind::BlockSplit => {
            let plan = Arc::new(blocksplit::blocksplit_plan(bdm, config.m, config.r)?);
            let mapper = blocksplit::BlockSplitMapper {
                bdm: Arc::clone(bdm),
                plan: Arc::clone(&plan),
            };
            let reducer = blocksplit::BlockSplitReducer {
                bdm: Arc::clone(bdm),
                plan,
                comparison: comparison.clone(),
            };
            run_job(&mapper, &reducer, dataset.partitions(), config)?
        }
        StrategyKind::PairRange => {
            let ranges = Arc::new(pairrange::compute_ranges(bdm.total_pairs, config.r));
            let mapper = pairrange::PairRangeMapper {
                bdm: Arc::clone(bdm),
                ranges: Arc::clone(&ranges),
            };
            let reducer = pairrange::PairRangeReducer {
                bdm: Arc::clone(bdm),
                ranges,
                comparison: comparison.clone(),
            };
            run_job(&mapper, &reducer, dataset.partitions(), config)?
        }
    };
    let run = MatchRun {
        strategy,
        decisions: out.outputs,
        metrics: out.metrics,
        shuffled_records: out.shuffled_records,
    };
    if run.total_comparisons() != bdm.total_pairs {
        return Err(Error::Invariant(format!(
            "{strategy} performed {} comparisons, BDM expects {}",
            run.total_comparisons(),
            bdm.total_pairs
        )));
    }
    Ok(run)
}

/// Big-endian encoding of a tuple of integers, so byte order equals
/// numeric order.
pub(crate) fn encode_order(parts: &[u64]) -> Vec<u8> {
    parts.iter().flat_map(|p| p.to_be_bytes()).collect()
}

pub(crate) fn decode_u64(bytes: &[u8], at: usize) -> Result<u64> {
    bytes
        .get(at..at + 8)
        .map(|b| u64::from_be_bytes(b.try_into().expect("8 bytes")))
        .ok_or_else(|| Error::Invariant(format!("truncated composite key {bytes:?}")))
}
