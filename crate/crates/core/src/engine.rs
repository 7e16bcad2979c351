// SPDX-License-Identifier: Apache-2.0

//! A deterministic in-process MapReduce runtime.
//!
//! Map tasks run one per input partition, the shuffle is materialized in
//! memory, and every reduce task sees its records grouped by
//! `(reduce_index, group)` with each group sorted by `order`. Records that tie
//! on `(group, order)` keep their emission order (partition order, then the
//! order the mapper emitted them), so outputs never depend on the number of
//! worker threads.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Routing key of a shuffled record.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CompositeKey {
    /// Target reduce task; the only field the partitioner looks at.
    pub reduce_index: usize,
    /// Grouping key within the reduce task.
    pub group: Vec<u8>,
    /// Sort key within a group.
    pub order: Vec<u8>,
}

impl CompositeKey {
    pub fn new(reduce_index: usize, group: Vec<u8>, order: Vec<u8>) -> Self {
        Self {
            reduce_index,
            group,
            order,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct JobConfig {
    /// Number of input partitions.
    pub m: usize,
    /// Number of reduce tasks.
    pub r: usize,
    /// Threads used to execute map and reduce tasks.
    pub worker_count: usize,
}

impl JobConfig {
    pub fn new(m: usize, r: usize, worker_count: usize) -> Result<Self> {
        let config = Self { m, r, worker_count };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.m == 0 || self.r == 0 || self.worker_count == 0 {
            return Err(Error::InvalidArgument(format!(
                "m, r and worker_count must be positive (got m={}, r={}, workers={})",
                self.m, self.r, self.worker_count
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskMetrics {
    pub reduce_index: usize,
    pub records_received: u64,
    pub comparisons_done: u64,
    pub cost_units: f64,
}

/// Collects the records a map task emits.
pub struct MapEmitter<V> {
    records: Vec<(CompositeKey, V)>,
}

impl<V> MapEmitter<V> {
    fn new() -> Self {
        Self {
            records: Vec::new(),
        }
    }

    pub fn emit(&mut self, key: CompositeKey, value: V) {
        self.records.push((key, value));
    }
}

impl<V> Extend<(CompositeKey, V)> for MapEmitter<V> {
    fn extend<T: IntoIterator<Item = (CompositeKey, V)>>(&mut self, iter: T) {
        self.records.extend(iter);
    }
}

/// Output sink and metric counters of one reduce task.
pub struct ReduceContext<O> {
    outputs: Vec<O>,
    comparisons: u64,
    cost: f64,
}

impl<O> Default for ReduceContext<O> {
    fn default() -> Self {
        Self::new()
    }
}

impl<O> ReduceContext<O> {
    pub fn new() -> Self {
        Self {
            outputs: Vec::new(),
            comparisons: 0,
            cost: 0.0,
        }
    }

    pub fn emit(&mut self, output: O) {
        self.outputs.push(output);
    }

    /// Counts one comparison of the given cost towards this task's metrics.
    pub fn record_comparison(&mut self, cost: f64) {
        self.comparisons += 1;
        self.cost += cost;
    }

    pub fn comparisons(&self) -> u64 {
        self.comparisons
    }

    pub fn cost_units(&self) -> f64 {
        self.cost
    }

    pub fn outputs(&self) -> &[O] {
        &self.outputs
    }
}

/// One group of records handed to a reducer.
pub struct Group<'a, V> {
    pub reduce_index: usize,
    pub key: &'a [u8],
    pub records: &'a [(CompositeKey, V)],
}

impl<'a, V> Group<'a, V> {
    pub fn values(&self) -> impl Iterator<Item = &'a V> + 'a {
        self.records.iter().map(|(_, v)| v)
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

pub trait Mapper<I>: Sync {
    type Value: Send;

    /// Processes one whole input partition.
    fn map(&self, partition: usize, records: &[I], out: &mut MapEmitter<Self::Value>)
        -> Result<()>;
}

pub trait Reducer<V>: Sync {
    type Output: Send;

    fn reduce(&self, group: Group<'_, V>, ctx: &mut ReduceContext<Self::Output>) -> Result<()>;
}

/// Outputs and metrics of a finished job, both indexed by reduce task.
#[derive(Debug)]
pub struct JobOutput<O> {
    pub outputs: Vec<Vec<O>>,
    pub metrics: Vec<TaskMetrics>,
    /// Total number of records emitted by all map tasks.
    pub shuffled_records: u64,
}

pub fn run_job<I, M, R>(
    mapper: &M,
    reducer: &R,
    partitions: &[Vec<I>],
    config: &JobConfig,
) -> Result<JobOutput<R::Output>>
where
    I: Sync,
    M: Mapper<I>,
    R: Reducer<M::Value>,
{
    config.validate()?;
    if partitions.len() != config.m {
        return Err(Error::InvalidArgument(format!(
            "job configured for {} partitions but got {}",
            config.m,
            partitions.len()
        )));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.worker_count)
        .build()
        .map_err(|e| Error::Invariant(format!("cannot start worker pool: {e}")))?;

    let map_outputs: Vec<Vec<(CompositeKey, M::Value)>> = pool.install(|| {
        partitions
            .par_iter()
            .enumerate()
            .map(|(index, records)| {
                let mut emitter = MapEmitter::new();
                mapper.map(index, records, &mut emitter)?;
                Ok(emitter.records)
            })
            .collect::<Result<_>>()
    })?;

    let r = config.r;
    let mut buckets: Vec<Vec<(CompositeKey, M::Value)>> = (0..r).map(|_| Vec::new()).collect();
    let mut shuffled_records = 0u64;
    for records in map_outputs {
        for (key, value) in records {
            if key.reduce_index >= r {
                return Err(Error::ReduceIndexOutOfRange {
                    reduce_index: key.reduce_index,
                    r,
                    group: key.group,
                });
            }
            shuffled_records += 1;
            buckets[key.reduce_index].push((key, value));
        }
    }

    let results: Vec<(Vec<R::Output>, TaskMetrics)> = pool.install(|| {
        buckets
            .into_par_iter()
            .enumerate()
            .map(|(reduce_index, mut bucket)| {
                // stable: ties keep emission order
                bucket.sort_by(|(a, _), (b, _)| (&a.group, &a.order).cmp(&(&b.group, &b.order)));
                let mut ctx = ReduceContext::new();
                for records in bucket.chunk_by(|(a, _), (b, _)| a.group == b.group) {
                    let group = Group {
                        reduce_index,
                        key: &records[0].0.group,
                        records,
                    };
                    reducer.reduce(group, &mut ctx)?;
                }
                let metrics = TaskMetrics {
                    reduce_index,
                    records_received: bucket.len() as u64,
                    comparisons_done: ctx.comparisons,
                    cost_units: ctx.cost,
                };
                Ok((ctx.outputs, metrics))
            })
            .collect::<Result<_>>()
    })?;

    let (outputs, metrics) = results.into_iter().unzip();
    Ok(JobOutput {
        outputs,
        metrics,
        shuffled_records,
    })
}

const HASH_SEED: u64 = 0x5eed_b10c_ba1a_4ce5;
const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

/// Platform-independent 64-bit hash: FNV-1a over the bytes, starting from
/// the FNV offset basis XOR a fixed seed, followed by the SplitMix64
/// finalizer.
pub fn stable_hash(bytes: &[u8]) -> u64 {
    let mut h = FNV_OFFSET ^ HASH_SEED;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(FNV_PRIME);
    }
    h ^= h >> 30;
    h = h.wrapping_mul(0xbf58_476d_1ce4_e5b9);
    h ^= h >> 27;
    h = h.wrapping_mul(0x94d0_49bb_1331_11eb);
    h ^ (h >> 31)
}

/// `stable_hash(key) mod r`.
pub fn hash_partition(key: &[u8], r: usize) -> usize {
    assert!(r >= 1, "hash_partition needs r >= 1");
    (stable_hash(key) % r as u64) as usize
}
