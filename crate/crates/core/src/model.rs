// SPDX-License-Identifier: Apache-2.0

//! Entities, blocks and pairs, plus the canonical orders every strategy
//! agrees on.
//!
//! Members of a block are ordered ascending by `(partition, id)`. Pairs of a
//! block are enumerated row-major over the upper triangle of that order, so
//! position `x` is paired with `x + 1 .. n` before position `x + 1` starts.

use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type EntityId = u64;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Entity {
    pub id: EntityId,
    /// Index of the input partition holding this entity.
    pub partition: usize,
    /// Blocking key.
    pub key: String,
    pub attrs: Vec<String>,
}

impl Entity {
    pub fn new(id: EntityId, partition: usize, key: impl Into<String>, attrs: Vec<String>) -> Self {
        Self {
            id,
            partition,
            key: key.into(),
            attrs,
        }
    }

    /// Sort key of the canonical in-block order.
    pub fn canonical_rank(&self) -> (usize, EntityId) {
        (self.partition, self.id)
    }
}

/// A dataset split into `m` input partitions.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Dataset {
    partitions: Vec<Vec<Entity>>,
}

impl Dataset {
    /// Builds a dataset, checking that ids are unique and every entity sits
    /// in the partition its `partition` field names.
    pub fn new(partitions: Vec<Vec<Entity>>) -> Result<Self> {
        if partitions.is_empty() {
            return Err(Error::InvalidDataset(
                "a dataset needs at least one partition".into(),
            ));
        }
        let mut seen = HashSet::new();
        for (index, partition) in partitions.iter().enumerate() {
            for entity in partition {
                if entity.partition != index {
                    return Err(Error::InvalidDataset(format!(
                        "entity {} declares partition {} but is stored in partition {index}",
                        entity.id, entity.partition
                    )));
                }
                if !seen.insert(entity.id) {
                    return Err(Error::InvalidDataset(format!(
                        "duplicate entity id {}",
                        entity.id
                    )));
                }
            }
        }
        Ok(Self { partitions })
    }

    /// Deals entities round-robin into `m` partitions, in the given order,
    /// rewriting their partition field.
    pub fn round_robin(entities: impl IntoIterator<Item = Entity>, m: usize) -> Result<Self> {
        if m == 0 {
            return Err(Error::InvalidArgument("m must be at least 1".into()));
        }
        let mut partitions = vec![Vec::new(); m];
        for (i, mut entity) in entities.into_iter().enumerate() {
            entity.partition = i % m;
            partitions[i % m].push(entity);
        }
        Self::new(partitions)
    }

    pub fn m(&self) -> usize {
        self.partitions.len()
    }

    pub fn partitions(&self) -> &[Vec<Entity>] {
        &self.partitions
    }

    pub fn into_partitions(self) -> Vec<Vec<Entity>> {
        self.partitions
    }

    pub fn len(&self) -> usize {
        self.partitions.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn entities(&self) -> impl Iterator<Item = &Entity> {
        self.partitions.iter().flatten()
    }
}

/// All entities sharing one blocking key.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Block {
    pub key: String,
    /// Member ids in canonical `(partition, id)` order.
    pub members: Vec<EntityId>,
}

impl Block {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

/// An unordered pair stored with `a` first in canonical block order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Pair {
    pub a: EntityId,
    pub b: EntityId,
}

impl Pair {
    pub fn new(a: EntityId, b: EntityId) -> Self {
        Self { a, b }
    }
}

/// Number of comparisons needed for a block of `n` entities.
pub fn pairs_in_block(n: u64) -> u64 {
    if n < 2 {
        0
    } else {
        n * (n - 1) / 2
    }
}

/// Row-major upper-triangle enumeration of a block's pairs.
pub fn enumerate_block_pairs(block: &Block) -> Vec<Pair> {
    let members = &block.members;
    let mut pairs = Vec::with_capacity(pairs_in_block(members.len() as u64) as usize);
    for (x, &a) in members.iter().enumerate() {
        for &b in &members[x + 1..] {
            pairs.push(Pair::new(a, b));
        }
    }
    pairs
}

/// Groups a dataset into blocks ordered by key bytes, members in canonical
/// order.
pub fn canonical_block_order(dataset: &Dataset) -> Vec<Block> {
    let mut by_key: BTreeMap<&[u8], Vec<(usize, EntityId)>> = BTreeMap::new();
    for entity in dataset.entities() {
        by_key
            .entry(entity.key.as_bytes())
            .or_default()
            .push(entity.canonical_rank());
    }
    by_key
        .into_iter()
        .map(|(key, mut ranks)| {
            ranks.sort_unstable();
            Block {
                // keys came from `String`s
                key: String::from_utf8(key.to_vec()).expect("utf-8 key"),
                members: ranks.into_iter().map(|(_, id)| id).collect(),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn entity(id: u64, partition: usize, key: &str) -> Entity {
        Entity::new(id, partition, key, vec![])
    }

    fn block(members: &[u64]) -> Block {
        Block {
            key: "k".into(),
            members: members.to_vec(),
        }
    }

    #[test]
    fn pair_counts() {
        assert_eq!(pairs_in_block(0), 0);
        assert_eq!(pairs_in_block(1), 0);
        assert_eq!(pairs_in_block(4), 6);
        assert_eq!(pairs_in_block(1000), 499_500);
    }

    #[test]
    fn enumerate_small_blocks() {
        assert!(enumerate_block_pairs(&block(&[7])).is_empty());
        assert_eq!(
            enumerate_block_pairs(&block(&[10, 11, 12])),
            vec![Pair::new(10, 11), Pair::new(10, 12), Pair::new(11, 12)]
        );
    }

    #[test]
    fn enumerate_matches_nested_loops() {
        for n in 0..=50u64 {
            let members: Vec<u64> = (0..n).map(|i| 100 + 3 * i).collect();
            let mut oracle = Vec::new();
            for i in 0..members.len() {
                for j in 0..members.len() {
                    if i < j {
                        oracle.push(Pair::new(members[i], members[j]));
                    }
                }
            }
            let pairs = enumerate_block_pairs(&block(&members));
            assert_eq!(pairs.len() as u64, pairs_in_block(n));
            assert_eq!(pairs, oracle);
            let distinct: HashSet<_> = pairs.iter().collect();
            assert_eq!(distinct.len(), pairs.len());
        }
    }

    #[test]
    fn blocks_sorted_by_key() {
        let ds = Dataset::new(vec![vec![
            entity(0, 0, "b"),
            entity(1, 0, "a"),
            entity(2, 0, "a"),
        ]])
        .unwrap();
        let blocks = canonical_block_order(&ds);
        assert_eq!(blocks.len(), 2);
        assert_eq!(blocks[0].key, "a");
        assert_eq!(blocks[0].members, vec![1, 2]);
        assert_eq!(blocks[1].key, "b");
        assert_eq!(blocks[1].members, vec![0]);
    }

    #[test]
    fn members_follow_partition_then_id() {
        let ds = Dataset::new(vec![
            vec![entity(9, 0, "a"), entity(4, 0, "a")],
            vec![entity(1, 1, "a")],
        ])
        .unwrap();
        assert_eq!(canonical_block_order(&ds)[0].members, vec![4, 9, 1]);
    }

    #[test]
    fn empty_dataset_has_no_blocks() {
        let ds = Dataset::new(vec![vec![], vec![]]).unwrap();
        assert!(canonical_block_order(&ds).is_empty());
    }

    #[test]
    fn rejects_bad_datasets() {
        assert!(Dataset::new(vec![]).is_err());
        assert!(Dataset::new(vec![vec![entity(0, 1, "a")]]).is_err());
        assert!(Dataset::new(vec![vec![entity(0, 0, "a"), entity(0, 0, "b")]]).is_err());
    }

    #[test]
    fn round_robin_deals_in_order() {
        let ds = Dataset::round_robin((0..5).map(|i| entity(i, 0, "a")), 2).unwrap();
        assert_eq!(ds.partitions()[0].len(), 3);
        assert_eq!(ds.partitions()[1].len(), 2);
        assert_eq!(ds.partitions()[1][0].partition, 1);
    }

    #[test]
    fn blocks_cover_random_dataset() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
        let entities: Vec<_> = (0..1000)
            .map(|id| entity(id, 0, &format!("k{}", rng.gen_range(0..60))))
            .collect();
        let ds = Dataset::round_robin(entities, 3).unwrap();
        let blocks = canonical_block_order(&ds);
        let mut seen = HashSet::new();
        for b in &blocks {
            for id in &b.members {
                assert!(seen.insert(*id), "entity {id} in two blocks");
            }
        }
        let all: HashSet<u64> = ds.entities().map(|e| e.id).collect();
        assert_eq!(seen, all);
        assert_eq!(blocks, canonical_block_order(&ds.clone()));
    }
}
