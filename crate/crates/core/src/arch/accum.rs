//! Three-stage accumulator: per-block sum of the PE arrays, a tree adder split
//! into two halves across blocks, and a running sum across channel groups.

use super::ArchError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AccumMode {
    Spiking,
    /// Encoding layer: the block holds bitplane `bitplane` of an 8-bit input.
    Encoding { bitplane: u32 },
}

impl AccumMode {
    pub fn shift(&self) -> u32 {
        match *self {
            AccumMode::Spiking => 0,
            AccumMode::Encoding { bitplane } => bitplane,
        }
    }
}

/// Stage 1: sums the same-cycle outputs of one block's arrays, shifted left by
/// the bitplane index in encoding mode.
pub fn accumulate_stage1(arrays: &[&[i32]], mode: AccumMode) -> Result<Vec<i32>, ArchError> {
    let len = arrays.first().map_or(0, |a| a.len());
    let mut out = vec![0; len];
    for a in arrays {
        if a.len() != len {
            return Err(ArchError::LengthMismatch { expected: len, found: a.len() });
        }
        for (o, v) in out.iter_mut().zip(a.iter()) {
            *o += v;
        }
    }
    let shift = mode.shift();
    out.iter_mut().for_each(|v| *v <<= shift);
    Ok(out)
}

/// Running per-vector sum across the channel groups of one output channel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroupState {
    acc: Vec<i32>,
    groups: usize,
    seen: usize,
}

impl GroupState {
    pub fn new(len: usize, groups: usize) -> Self {
        Self { acc: vec![0; len], groups, seen: 0 }
    }

    pub fn groups_seen(&self) -> usize {
        self.seen
    }

    pub fn partial(&self) -> &[i32] {
        &self.acc
    }
}

fn tree_sum(blocks: &[Vec<i32>], out: &mut [i32]) {
    for b in blocks {
        for (o, v) in out.iter_mut().zip(b) {
            *o += v;
        }
    }
}

/// Stages 2 and 3: adds the block vectors through two half-trees, folds the
/// result into `state`, and emits the completed sum on the last group.
///
/// `is_last_group` must agree with the group count `state` was created with.
pub fn accumulate_tree(
    blocks: &[Vec<i32>],
    max_blocks: usize,
    state: &mut GroupState,
    is_last_group: bool,
) -> Result<Option<Vec<i32>>, ArchError> {
    if blocks.len() > max_blocks {
        return Err(ArchError::TooManyBlocks { blocks: blocks.len(), max: max_blocks });
    }
    if let Some(b) = blocks.iter().find(|b| b.len() != state.acc.len()) {
        return Err(ArchError::LengthMismatch { expected: state.acc.len(), found: b.len() });
    }
    if state.seen == state.groups {
        return Err(ArchError::TooManyGroups { expected: state.groups });
    }
    if is_last_group && state.seen + 1 != state.groups {
        return Err(ArchError::EmitBeforeLastGroup { seen: state.seen + 1, expected: state.groups });
    }
    let half = max_blocks.div_ceil(2).min(blocks.len());
    let mut left = vec![0; state.acc.len()];
    let mut right = vec![0; state.acc.len()];
    tree_sum(&blocks[..half], &mut left);
    tree_sum(&blocks[half..], &mut right);
    for ((a, l), r) in state.acc.iter_mut().zip(&left).zip(&right) {
        *a += l + r;
    }
    state.seen += 1;
    if is_last_group {
        Ok(Some(std::mem::take(&mut state.acc)))
    } else {
        Ok(None)
    }
}
