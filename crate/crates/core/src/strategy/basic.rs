// SPDX-License-Identifier: Apache-2.0

//! Baseline: every block goes, whole, to the reduce task its key hashes to.

use super::{encode_order, Comparison, PairSink};
use crate::engine::{hash_partition, CompositeKey, Group, MapEmitter, Mapper, ReduceContext, Reducer};
use crate::error::Result;
use crate::matching::MatchDecision;
use crate::model::Entity;

pub fn basic_map_emit(entity: &Entity, r: usize) -> (CompositeKey, Entity) {
    let key = CompositeKey::new(
        hash_partition(entity.key.as_bytes(), r),
        entity.key.as_bytes().to_vec(),
        encode_order(&[entity.partition as u64, entity.id]),
    );
    (key, entity.clone())
}

/// Compares all pairs of one block given in canonical order.
pub fn basic_reduce<'a>(block: impl IntoIterator<Item = &'a Entity>, sink: &mut PairSink<'_>) {
    let members: Vec<&Entity> = block.into_iter().collect();
    for (x, a) in members.iter().enumerate() {
        for b in &members[x + 1..] {
            sink.compare(a, b);
        }
    }
}

pub(crate) struct BasicMapper {
    pub r: usize,
}

impl Mapper<Entity> for BasicMapper {
    type Value = Entity;

    fn map(&self, _partition: usize, records: &[Entity], out: &mut MapEmitter<Entity>) -> Result<()> {
        out.extend(records.iter().map(|e| basic_map_emit(e, self.r)));
        Ok(())
    }
}

pub(crate) struct BasicReducer {
    pub comparison: Comparison,
}

impl Reducer<Entity> for BasicReducer {
    type Output = MatchDecision;

    fn reduce(&self, group: Group<'_, Entity>, ctx: &mut ReduceContext<MatchDecision>) -> Result<()> {
        basic_reduce(group.values(), &mut self.comparison.sink(ctx));
        Ok(())
    }
}
