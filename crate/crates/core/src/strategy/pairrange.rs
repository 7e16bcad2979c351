// SPDX-License-Identifier: Apache-2.0

//! PairRange: number every comparison pair of the dataset, cut `[0, P)` into
//! `r` equal-width contiguous ranges, and let reduce task `k` compute exactly
//! the pairs numbered inside range `k`.
//!
//! Pairs are numbered block by block in BDM order; inside block `b` of size
//! `n`, pair `(x, y)` with `x < y` gets
//!
//! ```text
//! offsets[b] + x·n − x(x+1)/2 + (y − x − 1)
//! ```
//!
//! i.e. row-major over the upper triangle. Range widths depend only on block
//! sizes, never on which input partition an entity came from.

use std::sync::Arc;

use serde::Serialize;

use super::{decode_u64, encode_order, Comparison, PairSink};
use crate::bdm::BlockDistributionMatrix;
use crate::engine::{CompositeKey, Group, MapEmitter, Mapper, ReduceContext, Reducer};
use crate::error::{Error, Result};
use crate::matching::MatchDecision;
use crate::model::Entity;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RangeTable {
    pub total_pairs: u64,
    pub r: usize,
    /// `⌈P / r⌉`.
    pub width: u64,
    /// Half-open `[start, end)` per reduce task.
    pub boundaries: Vec<(u64, u64)>,
}

impl RangeTable {
    /// Range holding global pair index `index`.
    pub fn range_of(&self, index: u64) -> usize {
        debug_assert!(index < self.total_pairs);
        (index / self.width) as usize
    }

    pub fn len_of(&self, k: usize) -> u64 {
        let (s, e) = self.boundaries[k];
        e - s
    }
}

pub fn compute_ranges(total_pairs: u64, r: usize) -> RangeTable {
    assert!(r >= 1, "compute_ranges needs r >= 1");
    let width = total_pairs.div_ceil(r as u64);
    let boundaries = (0..r as u64)
        .map(|k| {
            let start = (k * width).min(total_pairs);
            let end = ((k + 1) * width).min(total_pairs);
            (start, end)
        })
        .collect();
    RangeTable {
        total_pairs,
        r,
        width,
        boundaries,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct PairCoordinate {
    pub block_index: usize,
    pub x: u64,
    pub y: u64,
}

/// Index of the first pair of row `x` in a block of size `n`.
fn row_start(x: u64, n: u64) -> u64 {
    x * n - x * (x + 1) / 2
}

/// In-block row-major index of pair `(x, y)`.
pub fn rowmajor_index(x: u64, y: u64, n: u64) -> u64 {
    debug_assert!(x < y && y < n);
    row_start(x, n) + (y - x - 1)
}

/// Inverse of [`rowmajor_index`].
pub fn rowmajor_coordinate(local: u64, n: u64) -> (u64, u64) {
    debug_assert!(n >= 2 && local < n * (n - 1) / 2);
    // largest x with row_start(x) <= local
    let (mut lo, mut hi) = (0u64, n - 1);
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if row_start(mid, n) <= local {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let x = lo;
    (x, local - row_start(x, n) + x + 1)
}

pub fn global_pair_index(bdm: &BlockDistributionMatrix, coord: PairCoordinate) -> Result<u64> {
    let n = *bdm.sizes.get(coord.block_index).ok_or_else(|| {
        Error::InvalidArgument(format!("block {} not in BDM", coord.block_index))
    })?;
    if !(coord.x < coord.y && coord.y < n) {
        return Err(Error::InvalidArgument(format!(
            "invalid pair coordinate {coord:?} for block of size {n}"
        )));
    }
    Ok(bdm.offsets[coord.block_index] + rowmajor_index(coord.x, coord.y, n))
}

/// Inverse of [`global_pair_index`].
pub fn pair_coordinate(bdm: &BlockDistributionMatrix, index: u64) -> Result<PairCoordinate> {
    if index >= bdm.total_pairs {
        return Err(Error::InvalidArgument(format!(
            "pair index {index} outside [0, {})",
            bdm.total_pairs
        )));
    }
    // blocks without pairs share their offset with the next block, so the
    // last block starting at or before `index` is the one holding it
    let block_index = bdm.offsets.partition_point(|&o| o <= index) - 1;
    let (x, y) = rowmajor_coordinate(index - bdm.offsets[block_index], bdm.sizes[block_index]);
    Ok(PairCoordinate { block_index, x, y })
}

/// Ranges containing at least one pair of the entity at `position` of
/// block `block_index`, ascending.
///
/// The entity's pairs form a column segment `(x, position)` for
/// `x < position`, one index per earlier row, and a contiguous row segment
/// `(position, y)`. The row segment touches every range between those of
/// its ends. The column segment is walked range by range, binary searching
/// for the first row past the current range's end.
pub fn entity_ranges(
    bdm: &BlockDistributionMatrix,
    ranges: &RangeTable,
    block_index: usize,
    position: u64,
) -> Vec<usize> {
    let n = bdm.sizes[block_index];
    let offset = bdm.offsets[block_index];
    debug_assert!(position < n);
    let p = position;
    let column = |x: u64| offset + rowmajor_index(x, p, n);
    let mut out = Vec::new();

    let mut x = 0;
    while x < p {
        let k = ranges.range_of(column(x));
        out.push(k);
        let end = ranges.boundaries[k].1;
        // first x' in (x, p) with column(x') >= end
        let (mut lo, mut hi) = (x + 1, p);
        while lo < hi {
            let mid = lo + (hi - lo) / 2;
            if column(mid) >= end {
                hi = mid;
            } else {
                lo = mid + 1;
            }
        }
        x = lo;
    }

    if p + 1 < n {
        let first = ranges.range_of(offset + rowmajor_index(p, p + 1, n));
        let last = ranges.range_of(offset + rowmajor_index(p, n - 1, n));
        for k in first..=last {
            if out.last() != Some(&k) {
                out.push(k);
            }
        }
    }
    out
}

/// An entity with its in-block coordinates, as shipped to range tasks.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RangeRecord {
    pub block_index: usize,
    pub position: u64,
    pub entity: Entity,
}

/// One record per range the entity takes part in.
pub fn pairrange_map_emit(
    entity: &Entity,
    block_index: usize,
    position: u64,
    bdm: &BlockDistributionMatrix,
    ranges: &RangeTable,
) -> Result<Vec<(CompositeKey, RangeRecord)>> {
    match bdm.block_index(&entity.key) {
        Some(b) if b == block_index && position < bdm.sizes[b] => {}
        _ => {
            return Err(Error::StalePlan(format!(
                "entity {} (key {:?}) is not at position {position} of block {block_index}",
                entity.id, entity.key
            )))
        }
    }
    Ok(entity_ranges(bdm, ranges, block_index, position)
        .into_iter()
        .map(|k| {
            let key = CompositeKey::new(
                k,
                encode_order(&[k as u64]),
                encode_order(&[block_index as u64, position]),
            );
            let record = RangeRecord {
                block_index,
                position,
                entity: entity.clone(),
            };
            (key, record)
        })
        .collect())
}

/// Computes the pairs of range `k` from the records delivered to it,
/// sorted by `(block_index, position)`.
pub fn pairrange_reduce(
    k: usize,
    records: &[&RangeRecord],
    bdm: &BlockDistributionMatrix,
    ranges: &RangeTable,
    sink: &mut PairSink<'_>,
) -> Result<()> {
    let (start, end) = ranges.boundaries[k];
    if start == end {
        return Ok(());
    }
    let lookup = |b: usize, pos: u64| -> Result<&Entity> {
        records
            .binary_search_by(|r| (r.block_index, r.position).cmp(&(b, pos)))
            .map(|i| &records[i].entity)
            .map_err(|_| {
                Error::Invariant(format!(
                    "range {k} needs block {b} position {pos}, which was not delivered"
                ))
            })
    };
    let PairCoordinate {
        mut block_index,
        mut x,
        mut y,
    } = pair_coordinate(bdm, start)?;
    let mut n = bdm.sizes[block_index];
    let mut a = lookup(block_index, x)?;
    for i in start..end {
        sink.compare(a, lookup(block_index, y)?);
        if i + 1 == end {
            break;
        }
        y += 1;
        if y == n {
            x += 1;
            y = x + 1;
            if y == n {
                block_index += 1;
                while block_index < bdm.block_count() && bdm.pair_counts[block_index] == 0 {
                    block_index += 1;
                }
                n = bdm.sizes[block_index];
                x = 0;
                y = 1;
            }
            a = lookup(block_index, x)?;
        }
    }
    Ok(())
}

pub(crate) struct PairRangeMapper {
    pub bdm: Arc<BlockDistributionMatrix>,
    pub ranges: Arc<RangeTable>,
}

impl Mapper<Entity> for PairRangeMapper {
    type Value = RangeRecord;

    fn map(&self, partition: usize, records: &[Entity], out: &mut MapEmitter<RangeRecord>) -> Result<()> {
        let located = self.bdm.locate_partition(partition, records)?;
        for (entity, (b, position)) in records.iter().zip(located) {
            out.extend(pairrange_map_emit(entity, b, position, &self.bdm, &self.ranges)?);
        }
        Ok(())
    }
}

pub(crate) struct PairRangeReducer {
    pub bdm: Arc<BlockDistributionMatrix>,
    pub ranges: Arc<RangeTable>,
    pub comparison: Comparison,
}

impl Reducer<RangeRecord> for PairRangeReducer {
    type Output = MatchDecision;

    fn reduce(&self, group: Group<'_, RangeRecord>, ctx: &mut ReduceContext<MatchDecision>) -> Result<()> {
        let k = decode_u64(group.key, 0)? as usize;
        if k != group.reduce_index {
            return Err(Error::Invariant(format!(
                "range {k} delivered to reduce task {}",
                group.reduce_index
            )));
        }
        let records: Vec<&RangeRecord> = group.values().collect();
        pairrange_reduce(k, &records, &self.bdm, &self.ranges, &mut self.comparison.sink(ctx))
    }
}
