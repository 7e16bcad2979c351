// SPDX-License-Identifier: Apache-2.0

//! Brute-force oracles and fixtures for unit tests.

use std::collections::{BTreeMap, HashSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::model::{Dataset, Entity, Pair};

/// Every same-key pair, oriented by `(partition, id)`, via nested loops
/// over the whole dataset.
pub fn brute_force_pairs(ds: &Dataset) -> HashSet<Pair> {
    let all: Vec<&Entity> = ds.entities().collect();
    let mut pairs = HashSet::new();
    for a in &all {
        for b in &all {
            if a.key == b.key && a.canonical_rank() < b.canonical_rank() {
                pairs.insert(Pair::new(a.id, b.id));
            }
        }
    }
    pairs
}

/// Random dataset with shuffled ids and per-partition order.
pub fn random_dataset(seed: u64, n: usize, keys: usize, m: usize) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ids: Vec<u64> = (0..n as u64).map(|i| i * 7 + 3).collect();
    rand::seq::SliceRandom::shuffle(ids.as_mut_slice(), &mut rng);
    let mut partitions = vec![Vec::new(); m];
    for id in ids {
        let p = rng.gen_range(0..m);
        let key = format!("k{}", rng.gen_range(0..keys));
        partitions[p].push(Entity::new(id, p, key, vec![format!("name{}", id % 13)]));
    }
    Dataset::new(partitions).unwrap()
}

/// Dataset from per-partition key lists; ids count up from 0.
pub fn dataset_from_keys(parts: &[&[&str]]) -> Dataset {
    let mut id = 0;
    let partitions = parts
        .iter()
        .enumerate()
        .map(|(p, keys)| {
            keys.iter()
                .map(|k| {
                    id += 1;
                    Entity::new(id - 1, p, *k, vec![])
                })
                .collect()
        })
        .collect();
    Dataset::new(partitions).unwrap()
}

/// Multiset of pairs, to catch duplicates.
pub fn pair_multiset<'a>(pairs: impl IntoIterator<Item = &'a Pair>) -> BTreeMap<Pair, usize> {
    let mut counts = BTreeMap::new();
    for p in pairs {
        *counts.entry(*p).or_insert(0) += 1;
    }
    counts
}
