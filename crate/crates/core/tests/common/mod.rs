// SPDX-License-Identifier: Apache-2.0

#![allow(dead_code)]

use std::collections::{BTreeMap, HashMap, HashSet};

use er_balance::{Dataset, Pair};

/// Every same-key pair of the dataset, oriented by `(partition, id)`,
/// found by nested loops inside each key group.
pub fn brute_force_pairs(ds: &Dataset) -> HashSet<Pair> {
    let mut by_key: HashMap<&str, Vec<(usize, u64)>> = HashMap::new();
    for e in ds.entities() {
        by_key.entry(&e.key).or_default().push((e.partition, e.id));
    }
    let mut pairs = HashSet::new();
    for members in by_key.values() {
        for a in members {
            for b in members {
                if a < b {
                    pairs.insert(Pair::new(a.1, b.1));
                }
            }
        }
    }
    pairs
}

/// Occurrence count of every pair.
pub fn multiset<'a>(pairs: impl IntoIterator<Item = &'a Pair>) -> BTreeMap<Pair, usize> {
    let mut counts = BTreeMap::new();
    for p in pairs {
        *counts.entry(*p).or_insert(0) += 1;
    }
    counts
}

/// Prints one verdict line and fails the test when `ok` is false.
pub fn verdict(criterion: &str, ok: bool, detail: impl AsRef<str>) {
    let tag = if ok { "PASS" } else { "FAIL" };
    println!("[{tag}] {criterion}: {}", detail.as_ref());
    assert!(ok, "{criterion} failed: {}", detail.as_ref());
}
