// SPDX-License-Identifier: Apache-2.0

//! BlockSplit: blocks with more pairs than the average reduce workload are
//! cut along the input partitions into sub-blocks. Each sub-block becomes a
//! match task of its own, and each pair of sub-blocks becomes a cross task
//! comparing one side against the other. Tasks are then handed out to
//! reduce tasks largest first, always to the least-loaded one.
//!
//! Sub-blocks follow the input partitions, so the plan depends on how the
//! input happens to be partitioned. A block dominated by one partition keeps
//! a large single task; there is no recursive splitting.

use std::cmp::{Ordering, Reverse};
use std::collections::{BTreeSet, BinaryHeap, HashMap};
use std::sync::Arc;

use serde::Serialize;

use super::{decode_u64, encode_order, Comparison, PairSink};
use crate::bdm::{average_workload, BlockDistributionMatrix};
use crate::engine::{CompositeKey, Group, MapEmitter, Mapper, ReduceContext, Reducer};
use crate::error::{Error, Result};
use crate::matching::MatchDecision;
use crate::model::{pairs_in_block, Entity};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TaskKind {
    /// An unsplit block.
    Whole,
    /// The entities of one input partition of a split block.
    Single { sub: usize },
    /// Cartesian product of two sub-blocks, `left < right`.
    Cross { left: usize, right: usize },
}

impl TaskKind {
    fn sort_rank(&self) -> (u8, usize, usize) {
        match *self {
            TaskKind::Whole => (0, 0, 0),
            TaskKind::Single { sub } => (0, sub, sub),
            TaskKind::Cross { left, right } => (1, left, right),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct MatchTask {
    pub block_index: usize,
    pub key: String,
    #[serde(flatten)]
    pub kind: TaskKind,
    pub pair_count: u64,
    pub assigned_reduce: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct MatchTaskPlan {
    pub r: usize,
    /// Tasks in assignment order (largest first).
    pub tasks: Vec<MatchTask>,
    pub per_reduce_load: Vec<u64>,
    pub split_blocks: BTreeSet<usize>,
    /// Split blocks whose largest sub-block alone exceeds the average
    /// workload.
    pub oversized_blocks: BTreeSet<usize>,
    #[serde(skip)]
    index: HashMap<(usize, TaskKind), usize>,
}

impl MatchTaskPlan {
    pub fn task_index(&self, block_index: usize, kind: TaskKind) -> Option<usize> {
        self.index.get(&(block_index, kind)).copied()
    }

    pub fn total_pairs(&self) -> u64 {
        self.tasks.iter().map(|t| t.pair_count).sum()
    }

    pub fn max_task_pairs(&self) -> u64 {
        self.tasks.iter().map(|t| t.pair_count).max().unwrap_or(0)
    }
}

/// Builds the match tasks for a BDM and assigns them to `r` reduce tasks.
pub fn blocksplit_plan(bdm: &BlockDistributionMatrix, m: usize, r: usize) -> Result<MatchTaskPlan> {
    if m != bdm.m {
        return Err(Error::InvalidArgument(format!(
            "plan asked for m={m} but the BDM has {} partitions",
            bdm.m
        )));
    }
    if r == 0 {
        return Err(Error::InvalidArgument("r must be at least 1".into()));
    }
    let average = average_workload(bdm, r);
    let mut tasks = Vec::new();
    let mut split_blocks = BTreeSet::new();
    let mut oversized_blocks = BTreeSet::new();
    for (b, row) in bdm.counts.iter().enumerate() {
        let pairs = bdm.pair_counts[b];
        if pairs == 0 {
            continue;
        }
        let task = |kind, pair_count| MatchTask {
            block_index: b,
            key: bdm.keys[b].clone(),
            kind,
            pair_count,
            assigned_reduce: 0,
        };
        if (pairs as f64) <= average {
            tasks.push(task(TaskKind::Whole, pairs));
            continue;
        }
        split_blocks.insert(b);
        let non_empty: Vec<usize> = (0..m).filter(|&i| row[i] > 0).collect();
        for (n, &i) in non_empty.iter().enumerate() {
            let single = pairs_in_block(row[i]);
            if single > 0 {
                tasks.push(task(TaskKind::Single { sub: i }, single));
            }
            if single as f64 > average {
                oversized_blocks.insert(b);
            }
            for &j in &non_empty[n + 1..] {
                tasks.push(task(TaskKind::Cross { left: i, right: j }, row[i] * row[j]));
            }
        }
    }

    tasks.sort_by(|a, b| {
        b.pair_count
            .cmp(&a.pair_count)
            .then(a.block_index.cmp(&b.block_index))
            .then_with(|| a.kind.sort_rank().cmp(&b.kind.sort_rank()))
    });

    let mut per_reduce_load = vec![0u64; r];
    let mut heap: BinaryHeap<Reverse<(u64, usize)>> = (0..r).map(|k| Reverse((0, k))).collect();
    for task in &mut tasks {
        let Reverse((load, k)) = heap.pop().expect("r >= 1");
        task.assigned_reduce = k;
        per_reduce_load[k] = load + task.pair_count;
        heap.push(Reverse((per_reduce_load[k], k)));
    }

    let index = tasks
        .iter()
        .enumerate()
        .map(|(t, task)| ((task.block_index, task.kind), t))
        .collect();
    Ok(MatchTaskPlan {
        r,
        tasks,
        per_reduce_load,
        split_blocks,
        oversized_blocks,
        index,
    })
}

/// Tasks an entity of `partition` in block `b` takes part in.
fn tasks_for(
    bdm: &BlockDistributionMatrix,
    plan: &MatchTaskPlan,
    b: usize,
    partition: usize,
) -> Vec<(usize, u8)> {
    if !plan.split_blocks.contains(&b) {
        return plan
            .task_index(b, TaskKind::Whole)
            .map(|t| vec![(t, 0)])
            .unwrap_or_default();
    }
    let row = &bdm.counts[b];
    let mut out = Vec::new();
    for (j, &count) in row.iter().enumerate() {
        let (kind, side) = match j.cmp(&partition) {
            Ordering::Equal => (TaskKind::Single { sub: partition }, 0),
            Ordering::Less if count > 0 => (
                TaskKind::Cross {
                    left: j,
                    right: partition,
                },
                1,
            ),
            Ordering::Greater if count > 0 => (
                TaskKind::Cross {
                    left: partition,
                    right: j,
                },
                0,
            ),
            _ => continue,
        };
        if let Some(t) = plan.task_index(b, kind) {
            out.push((t, side));
        }
    }
    out
}

/// Records realizing the plan for one entity. The sort key starts with a
/// side flag (0 for the left sub-block of a cross task, 1 for the right).
pub fn blocksplit_map_emit(
    entity: &Entity,
    bdm: &BlockDistributionMatrix,
    plan: &MatchTaskPlan,
) -> Result<Vec<(CompositeKey, Entity)>> {
    let b = bdm
        .block_index(&entity.key)
        .ok_or_else(|| Error::StalePlan(format!("blocking key {:?} not in BDM", entity.key)))?;
    if entity.partition >= bdm.m || bdm.counts[b][entity.partition] == 0 {
        return Err(Error::StalePlan(format!(
            "BDM has no entities of block {:?} in partition {}",
            entity.key, entity.partition
        )));
    }
    Ok(tasks_for(bdm, plan, b, entity.partition)
        .into_iter()
        .map(|(t, side)| {
            let mut order = vec![side];
            order.extend(encode_order(&[entity.partition as u64, entity.id]));
            let key = CompositeKey::new(
                plan.tasks[t].assigned_reduce,
                encode_order(&[t as u64]),
                order,
            );
            (key, entity.clone())
        })
        .collect())
}

/// Compares the entities routed to one match task. `left` and `right` are
/// the two sides of a cross task; for other tasks `right` is empty.
pub fn blocksplit_reduce(
    task: &MatchTask,
    bdm: &BlockDistributionMatrix,
    left: &[&Entity],
    right: &[&Entity],
    sink: &mut PairSink<'_>,
) -> Result<()> {
    let row = &bdm.counts[task.block_index];
    let (want_left, want_right) = match task.kind {
        TaskKind::Whole => (bdm.sizes[task.block_index], 0),
        TaskKind::Single { sub } => (row[sub], 0),
        TaskKind::Cross { left, right } => (row[left], row[right]),
    };
    if left.len() as u64 != want_left || right.len() as u64 != want_right {
        return Err(Error::Invariant(format!(
            "task {:?} of block {:?} received {}+{} entities, BDM expects {want_left}+{want_right}",
            task.kind,
            task.key,
            left.len(),
            right.len()
        )));
    }
    match task.kind {
        TaskKind::Whole | TaskKind::Single { .. } => {
            for (x, a) in left.iter().enumerate() {
                for b in &left[x + 1..] {
                    sink.compare(a, b);
                }
            }
        }
        TaskKind::Cross { .. } => {
            for a in left {
                for b in right {
                    sink.compare(a, b);
                }
            }
        }
    }
    Ok(())
}

pub(crate) struct BlockSplitMapper {
    pub bdm: Arc<BlockDistributionMatrix>,
    pub plan: Arc<MatchTaskPlan>,
}

impl Mapper<Entity> for BlockSplitMapper {
    type Value = Entity;

    fn map(&self, _partition: usize, records: &[Entity], out: &mut MapEmitter<Entity>) -> Result<()> {
        for entity in records {
            out.extend(blocksplit_map_emit(entity, &self.bdm, &self.plan)?);
        }
        Ok(())
    }
}

pub(crate) struct BlockSplitReducer {
    pub bdm: Arc<BlockDistributionMatrix>,
    pub plan: Arc<MatchTaskPlan>,
    pub comparison: Comparison,
}

impl Reducer<Entity> for BlockSplitReducer {
    type Output = MatchDecision;

    fn reduce(&self, group: Group<'_, Entity>, ctx: &mut ReduceContext<MatchDecision>) -> Result<()> {
        let t = decode_u64(group.key, 0)? as usize;
        let task = self
            .plan
            .tasks
            .get(t)
            .ok_or_else(|| Error::Invariant(format!("unknown match task {t}")))?;
        let (left, right): (Vec<_>, Vec<_>) = group.records.iter().partition(|(k, _)| k.order[0] == 0);
        let left: Vec<&Entity> = left.into_iter().map(|(_, e)| e).collect();
        let right: Vec<&Entity> = right.into_iter().map(|(_, e)| e).collect();
        blocksplit_reduce(task, &self.bdm, &left, &right, &mut self.comparison.sink(ctx))
    }
}
