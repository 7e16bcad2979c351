// SPDX-License-Identifier: Apache-2.0

//! The Block Distribution Matrix: how many entities of every block live in
//! every input partition, with the derived pair counts and pair offsets that
//! both load-balancing strategies plan from.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::engine::{
    hash_partition, run_job, CompositeKey, Group, JobConfig, MapEmitter, Mapper, ReduceContext,
    Reducer,
};
use crate::error::{Error, Result};
use crate::model::{pairs_in_block, Dataset, Entity};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockDistributionMatrix {
    /// Blocking keys in canonical (byte) order.
    pub keys: Vec<String>,
    /// `counts[b][i]`: entities of block `b` in input partition `i`.
    pub counts: Vec<Vec<u64>>,
    pub sizes: Vec<u64>,
    pub pair_counts: Vec<u64>,
    /// Prefix sums of `pair_counts`.
    pub offsets: Vec<u64>,
    pub total_pairs: u64,
    pub m: usize,
    pub entity_total: u64,
}

impl BlockDistributionMatrix {
    /// Derives sizes, pair counts and offsets from per-partition counts.
    /// Rows must be sorted by key.
    pub fn from_counts(m: usize, rows: Vec<(String, Vec<u64>)>) -> Result<Self> {
        if m == 0 {
            return Err(Error::InvalidArgument("m must be at least 1".into()));
        }
        if rows.windows(2).any(|w| w[0].0.as_bytes() >= w[1].0.as_bytes()) {
            return Err(Error::InvalidArgument(
                "BDM rows must be strictly ordered by key".into(),
            ));
        }
        let mut keys = Vec::with_capacity(rows.len());
        let mut counts = Vec::with_capacity(rows.len());
        let mut sizes = Vec::with_capacity(rows.len());
        let mut pair_counts = Vec::with_capacity(rows.len());
        let mut offsets = Vec::with_capacity(rows.len());
        let mut total_pairs = 0u64;
        for (key, row) in rows {
            if row.len() != m {
                return Err(Error::InvalidArgument(format!(
                    "BDM row for key {key:?} has {} columns, expected {m}",
                    row.len()
                )));
            }
            let size: u64 = row.iter().sum();
            let pairs = pairs_in_block(size);
            offsets.push(total_pairs);
            total_pairs += pairs;
            keys.push(key);
            counts.push(row);
            sizes.push(size);
            pair_counts.push(pairs);
        }
        let entity_total = sizes.iter().sum();
        Ok(Self {
            keys,
            counts,
            sizes,
            pair_counts,
            offsets,
            total_pairs,
            m,
            entity_total,
        })
    }

    pub fn block_count(&self) -> usize {
        self.keys.len()
    }

    pub fn block_index(&self, key: &str) -> Option<usize> {
        self.keys
            .binary_search_by(|k| k.as_bytes().cmp(key.as_bytes()))
            .ok()
    }

    /// Number of entities of block `b` in partitions before `partition`.
    pub fn partition_start(&self, b: usize, partition: usize) -> u64 {
        self.counts[b][..partition].iter().sum()
    }

    /// `(block_index, position)` of every entity of one input partition, in
    /// the order the entities are given. Positions follow the canonical
    /// `(partition, id)` order, so only the ids of the partition's own
    /// entities are needed.
    pub fn locate_partition(&self, partition: usize, entities: &[Entity]) -> Result<Vec<(usize, u64)>> {
        if partition >= self.m {
            return Err(Error::StalePlan(format!(
                "partition {partition} outside the BDM's {} partitions",
                self.m
            )));
        }
        let mut per_block: BTreeMap<usize, Vec<(u64, usize)>> = BTreeMap::new();
        for (slot, entity) in entities.iter().enumerate() {
            let b = self.block_index(&entity.key).ok_or_else(|| {
                Error::StalePlan(format!("blocking key {:?} not in BDM", entity.key))
            })?;
            per_block.entry(b).or_default().push((entity.id, slot));
        }
        let mut located = vec![(0usize, 0u64); entities.len()];
        for (b, mut members) in per_block {
            if members.len() as u64 != self.counts[b][partition] {
                return Err(Error::StalePlan(format!(
                    "block {:?} has {} entities in partition {partition}, BDM says {}",
                    self.keys[b],
                    members.len(),
                    self.counts[b][partition]
                )));
            }
            members.sort_unstable();
            let start = self.partition_start(b, partition);
            for (rank, (_, slot)) in members.into_iter().enumerate() {
                located[slot] = (b, start + rank as u64);
            }
        }
        Ok(located)
    }
}

/// Average reduce workload `P / r` as a double.
pub fn average_workload(bdm: &BlockDistributionMatrix, r: usize) -> f64 {
    assert!(r >= 1, "average_workload needs r >= 1");
    bdm.total_pairs as f64 / r as f64
}

struct CountMapper {
    r: usize,
}

impl Mapper<Entity> for CountMapper {
    type Value = (usize, u64);

    fn map(&self, partition: usize, records: &[Entity], out: &mut MapEmitter<(usize, u64)>) -> Result<()> {
        // map-side combine: one record per key and partition
        let mut local: BTreeMap<&str, u64> = BTreeMap::new();
        for entity in records {
            *local.entry(&entity.key).or_default() += 1;
        }
        out.extend(local.into_iter().map(|(key, count)| {
            let key = CompositeKey::new(
                hash_partition(key.as_bytes(), self.r),
                key.as_bytes().to_vec(),
                (partition as u64).to_be_bytes().to_vec(),
            );
            (key, (partition, count))
        }));
        Ok(())
    }
}

struct CountReducer {
    m: usize,
}

impl Reducer<(usize, u64)> for CountReducer {
    type Output = (String, Vec<u64>);

    fn reduce(&self, group: Group<'_, (usize, u64)>, ctx: &mut ReduceContext<Self::Output>) -> Result<()> {
        let mut row = vec![0u64; self.m];
        for &(partition, count) in group.values() {
            row[partition] += count;
        }
        let key = String::from_utf8(group.key.to_vec())
            .map_err(|e| Error::Invariant(format!("non utf-8 blocking key: {e}")))?;
        ctx.emit((key, row));
        Ok(())
    }
}

/// Computes the BDM with an analysis job on the engine.
pub fn compute_bdm(dataset: &Dataset, config: &JobConfig) -> Result<BlockDistributionMatrix> {
    let mapper = CountMapper { r: config.r };
    let reducer = CountReducer { m: config.m };
    let out = run_job(&mapper, &reducer, dataset.partitions(), config)?;
    let mut rows: Vec<(String, Vec<u64>)> = out.outputs.into_iter().flatten().collect();
    rows.sort_by(|a, b| a.0.as_bytes().cmp(b.0.as_bytes()));
    BlockDistributionMatrix::from_counts(config.m, rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dataset(parts: &[&[&str]]) -> Dataset {
        let mut id = 0;
        let partitions = parts
            .iter()
            .enumerate()
            .map(|(p, keys)| {
                keys.iter()
                    .map(|k| {
                        id += 1;
                        Entity::new(id, p, *k, vec![])
                    })
                    .collect()
            })
            .collect();
        Dataset::new(partitions).unwrap()
    }

    /// Plain sequential count, independent of the engine.
    fn sequential_oracle(ds: &Dataset) -> BlockDistributionMatrix {
        let mut rows: BTreeMap<Vec<u8>, Vec<u64>> = BTreeMap::new();
        for e in ds.entities() {
            rows.entry(e.key.as_bytes().to_vec())
                .or_insert_with(|| vec![0; ds.m()])[e.partition] += 1;
        }
        let rows = rows
            .into_iter()
            .map(|(k, v)| (String::from_utf8(k).unwrap(), v))
            .collect();
        BlockDistributionMatrix::from_counts(ds.m(), rows).unwrap()
    }

    #[test]
    fn two_partition_example() {
        let ds = dataset(&[&["a", "a", "b"], &["a", "b", "b", "c"]]);
        let bdm = compute_bdm(&ds, &JobConfig::new(2, 3, 2).unwrap()).unwrap();
        assert_eq!(bdm.keys, vec!["a", "b", "c"]);
        assert_eq!(bdm.counts, vec![vec![2, 1], vec![1, 2], vec![0, 1]]);
        assert_eq!(bdm.sizes, vec![3, 3, 1]);
        assert_eq!(bdm.pair_counts, vec![3, 3, 0]);
        assert_eq!(bdm.offsets, vec![0, 3, 6]);
        assert_eq!(bdm.total_pairs, 6);
        assert_eq!(bdm.entity_total, 7);
        assert_eq!(bdm, sequential_oracle(&ds));
    }

    #[test]
    fn empty_input() {
        let ds = dataset(&[&[], &[]]);
        let bdm = compute_bdm(&ds, &JobConfig::new(2, 2, 1).unwrap()).unwrap();
        assert_eq!(bdm.block_count(), 0);
        assert_eq!(bdm.total_pairs, 0);
    }

    #[test]
    fn single_block() {
        let ds = dataset(&[&["x", "x", "x", "x"]]);
        let bdm = compute_bdm(&ds, &JobConfig::new(1, 1, 1).unwrap()).unwrap();
        assert_eq!(bdm.counts, vec![vec![4]]);
        assert_eq!(bdm.pair_counts, vec![6]);
        assert_eq!(bdm.total_pairs, 6);
    }

    #[test]
    fn average_workload_values() {
        let ds = dataset(&[&["a", "a", "b"], &["a", "b", "b", "c"]]);
        let bdm = sequential_oracle(&ds);
        assert_eq!(average_workload(&bdm, 3), 2.0);
        let empty = BlockDistributionMatrix::from_counts(1, vec![]).unwrap();
        assert_eq!(average_workload(&empty, 5), 0.0);
        let ten = BlockDistributionMatrix::from_counts(1, vec![("k".into(), vec![5])]).unwrap();
        assert!((average_workload(&ten, 3) - 10.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn locate_assigns_canonical_positions() {
        // partition 0 holds ids 1..=3, partition 1 holds ids 4..=7
        let ds = dataset(&[&["a", "a", "b"], &["a", "b", "b", "c"]]);
        let bdm = sequential_oracle(&ds);
        let mut reversed = ds.partitions()[1].clone();
        reversed.reverse();
        let located = bdm.locate_partition(1, &reversed).unwrap();
        // reversed ids: 7(c) 6(b) 5(b) 4(a)
        assert_eq!(located, vec![(2, 0), (1, 2), (1, 1), (0, 2)]);
    }

    #[test]
    fn locate_rejects_stale_bdm() {
        let ds = dataset(&[&["a", "a"]]);
        let bdm = sequential_oracle(&ds);
        let extra = vec![Entity::new(50, 0, "zzz", vec![])];
        assert!(matches!(bdm.locate_partition(0, &extra), Err(Error::StalePlan(_))));
        let short = vec![ds.partitions()[0][0].clone()];
        assert!(matches!(bdm.locate_partition(0, &short), Err(Error::StalePlan(_))));
    }

    #[test]
    fn from_counts_rejects_unsorted_rows() {
        let rows = vec![("b".to_string(), vec![1]), ("a".to_string(), vec![1])];
        assert!(BlockDistributionMatrix::from_counts(1, rows).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn arb_dataset() -> impl Strategy<Value = Dataset> {
            (1usize..5, proptest::collection::vec(0u8..30, 0..400)).prop_map(|(m, keys)| {
                let entities = keys
                    .into_iter()
                    .enumerate()
                    .map(|(id, k)| Entity::new(id as u64, 0, format!("k{k}"), vec![]));
                Dataset::round_robin(entities, m).unwrap()
            })
        }

        proptest! {
            #[test]
            fn engine_matches_sequential_count(ds in arb_dataset(), r in 1usize..6, w in 1usize..4) {
                let bdm = compute_bdm(&ds, &JobConfig::new(ds.m(), r, w).unwrap()).unwrap();
                prop_assert_eq!(&bdm, &sequential_oracle(&ds));
                prop_assert_eq!(bdm.sizes.iter().sum::<u64>(), ds.len() as u64);
                if let (Some(o), Some(p)) = (bdm.offsets.last(), bdm.pair_counts.last()) {
                    prop_assert_eq!(o + p, bdm.total_pairs);
                    prop_assert_eq!(bdm.offsets[0], 0);
                }
            }

            #[test]
            fn permutation_within_partitions_is_invisible(ds in arb_dataset(), seed in any::<u64>()) {
                use rand::{seq::SliceRandom, SeedableRng};
                let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
                let mut parts = ds.clone().into_partitions();
                for p in &mut parts {
                    p.shuffle(&mut rng);
                }
                let shuffled = Dataset::new(parts).unwrap();
                let config = JobConfig::new(ds.m(), 3, 2).unwrap();
                prop_assert_eq!(compute_bdm(&ds, &config).unwrap(), compute_bdm(&shuffled, &config).unwrap());
            }
        }
    }
}
