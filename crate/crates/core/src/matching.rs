// SPDX-License-Identifier: Apache-2.0

//! Pairwise comparators: the reduce-side work the strategies distribute.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::model::{Entity, Pair};

pub const DEFAULT_THRESHOLD: f64 = 0.8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecisionFlag {
    /// One side lacks the compared attribute.
    MissingAttribute,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchDecision {
    pub pair: Pair,
    pub similarity: f64,
    pub is_match: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub flag: Option<DecisionFlag>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatcherKind {
    /// Jaccard similarity of character trigrams.
    Jaccard,
    /// Always 0; isolates load-balancing cost from matcher cost.
    Null,
}

impl fmt::Display for MatcherKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MatcherKind::Jaccard => "jaccard",
            MatcherKind::Null => "null",
        })
    }
}

impl FromStr for MatcherKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s {
            "jaccard" => Ok(MatcherKind::Jaccard),
            "null" => Ok(MatcherKind::Null),
            other => Err(Error::InvalidArgument(format!("unknown matcher {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatcherConfig {
    pub kind: MatcherKind,
    /// Index into `Entity::attrs` of the compared attribute.
    pub attribute: usize,
    pub threshold: f64,
}

impl Default for MatcherConfig {
    fn default() -> Self {
        Self {
            kind: MatcherKind::Jaccard,
            attribute: 0,
            threshold: DEFAULT_THRESHOLD,
        }
    }
}

impl MatcherConfig {
    pub fn null() -> Self {
        Self {
            kind: MatcherKind::Null,
            ..Self::default()
        }
    }
}

/// Compares two entities of the same block. The pair is reported with `a`
/// first, so callers pass entities in canonical order.
pub fn compare(a: &Entity, b: &Entity, config: &MatcherConfig) -> MatchDecision {
    let pair = Pair::new(a.id, b.id);
    let (similarity, flag) = match config.kind {
        MatcherKind::Null => (0.0, None),
        MatcherKind::Jaccard => {
            match (a.attrs.get(config.attribute), b.attrs.get(config.attribute)) {
                (Some(x), Some(y)) => (trigram_jaccard(x, y), None),
                _ => (0.0, Some(DecisionFlag::MissingAttribute)),
            }
        }
    };
    MatchDecision {
        pair,
        similarity,
        is_match: flag.is_none() && similarity >= config.threshold,
        flag,
    }
}

const NO_CHAR: u64 = 0x1f_ffff;

/// Sorted, deduplicated trigram codes. Strings shorter than three
/// characters yield a single padded gram so they still compare equal to
/// themselves.
fn trigrams(s: &str) -> Vec<u64> {
    let chars: Vec<u64> = s.chars().map(u64::from).collect();
    let mut grams: Vec<u64> = match chars.len() {
        0 => Vec::new(),
        1 => vec![(chars[0] << 42) | (NO_CHAR << 21) | NO_CHAR],
        2 => vec![(chars[0] << 42) | (chars[1] << 21) | NO_CHAR],
        _ => chars
            .windows(3)
            .map(|w| (w[0] << 42) | (w[1] << 21) | w[2])
            .collect(),
    };
    grams.sort_unstable();
    grams.dedup();
    grams
}

/// `|A ∩ B| / |A ∪ B|` over character trigrams. Two empty strings are
/// identical and score 1.
pub fn trigram_jaccard(x: &str, y: &str) -> f64 {
    if x == y {
        return 1.0;
    }
    let (a, b) = (trigrams(x), trigrams(y));
    let (mut i, mut j, mut common) = (0, 0, 0usize);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            Ordering::Less => i += 1,
            Ordering::Greater => j += 1,
            Ordering::Equal => {
                common += 1;
                i += 1;
                j += 1;
            }
        }
    }
    let union = a.len() + b.len() - common;
    if union == 0 {
        1.0
    } else {
        common as f64 / union as f64
    }
}

/// Cost charged for one comparison in the task metrics.
pub trait CostModel: Send + Sync {
    fn cost(&self, a: &Entity, b: &Entity) -> f64;
}

/// One cost unit per comparison.
#[derive(Debug, Clone, Copy, Default)]
pub struct UnitCost;

impl CostModel for UnitCost {
    fn cost(&self, _a: &Entity, _b: &Entity) -> f64 {
        1.0
    }
}
