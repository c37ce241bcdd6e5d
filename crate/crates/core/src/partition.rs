//! Dyadic block system over a dataset of `N` rows.
//!
//! The `2^K`-partition splits the 1-based index set `[N]` into the
//! contiguous blocks `B_k^(K) = ]floor((k-1)N/2^K), floor(kN/2^K)]`. Training
//! subsamples are such blocks for `K_min <= K <= K_max`; risk comparisons
//! between two candidates use `V` blocks of the `2^K0`-partition avoiding both
//! training blocks, where `K0 = max(3, ceil(log2(V/3)) + 2)`.
//!
//! External indices are 1-based. [`BlockId::range`] gives the 0-based
//! half-open storage range.

pub mod check;

use std::fmt;
use std::ops::{Range, RangeInclusive};

use thiserror::Error;

/// Smallest admissible partition level.
pub const MIN_LEVEL: u32 = 3;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PartitionError {
    #[error("invalid level {level} for N = {n}: must lie in [3, {max}]")]
    InvalidLevel { level: u32, n: usize, max: u32 },
    #[error("invalid block index {index} at level {level}: must lie in [1, {count}]")]
    InvalidIndex {
        level: u32,
        index: usize,
        count: usize,
    },
    #[error("invalid V = {v_count}: must satisfy 3 <= V <= N/8 (N = {n})")]
    InvalidV { v_count: usize, n: usize },
    #[error(
        "infeasible layout: only {eligible} comparison blocks avoid {b1} and {b2}, need V = {v_count}"
    )]
    InfeasibleLayout {
        b1: BlockId,
        b2: BlockId,
        eligible: usize,
        v_count: usize,
    },
}

/// Block `B_index^(level)` of the `2^level`-partition. `index` is 1-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct BlockId {
    pub level: u32,
    pub index: usize,
}

impl fmt::Display for BlockId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "B[{}]^({})", self.index, self.level)
    }
}

/// `floor(log2 n)`, or 0 for `n = 0`.
pub fn max_level(n: usize) -> u32 {
    if n == 0 {
        0
    } else {
        usize::BITS - 1 - n.leading_zeros()
    }
}

#[inline]
fn boundary(n: usize, k: usize, level: u32) -> usize {
    ((k as u128 * n as u128) >> level) as usize
}

impl BlockId {
    pub fn new(level: u32, index: usize) -> Self {
        Self { level, index }
    }

    /// Number of blocks at this level.
    pub fn count(&self) -> usize {
        1usize << self.level
    }

    pub fn validate(&self, n: usize) -> Result<(), PartitionError> {
        let max = max_level(n);
        if self.level < MIN_LEVEL || self.level > max {
            return Err(PartitionError::InvalidLevel {
                level: self.level,
                n,
                max,
            });
        }
        if self.index == 0 || self.index > self.count() {
            return Err(PartitionError::InvalidIndex {
                level: self.level,
                index: self.index,
                count: self.count(),
            });
        }
        Ok(())
    }

    /// 0-based half-open row range of the block in a dataset of size `n`.
    pub fn range(&self, n: usize) -> Result<Range<usize>, PartitionError> {
        self.validate(n)?;
        Ok(self.range_unchecked(n))
    }

    pub(crate) fn range_unchecked(&self, n: usize) -> Range<usize> {
        boundary(n, self.index - 1, self.level)..boundary(n, self.index, self.level)
    }

    pub fn size(&self, n: usize) -> Result<usize, PartitionError> {
        self.range(n).map(|r| r.len())
    }

    /// All blocks of the `2^level`-partition in index order.
    pub fn level_blocks(level: u32) -> impl Iterator<Item = BlockId> {
        (1..=(1usize << level)).map(move |index| BlockId { level, index })
    }
}

/// 1-based index set `{floor((k-1)n/2^K)+1, ..., floor(kn/2^K)}` of block `b`.
pub fn block_indices(n: usize, b: BlockId) -> Result<RangeInclusive<usize>, PartitionError> {
    let r = b.range(n)?;
    Ok(r.start + 1..=r.end)
}

/// `K0 = max(3, ceil(log2(V/3)) + 2)`.
///
/// The unclamped formula gives 2 at `V = 3`; the clamp keeps every comparison level at
/// or above the smallest training level.
pub fn k0_level(v_count: usize) -> Result<u32, PartitionError> {
    if v_count < 3 {
        return Err(PartitionError::InvalidV { v_count, n: 0 });
    }
    // ceil(log2(V/3)) is the least j >= 0 with 3 * 2^j >= V.
    let mut j = 0u32;
    while 3u128 << j < v_count as u128 {
        j += 1;
    }
    Ok((j + 2).max(MIN_LEVEL))
}

/// Shared `2^K0` comparison partition for `V` median-of-means blocks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ComparisonLayout {
    v_count: usize,
    k0: u32,
    dataset_size: usize,
}

impl ComparisonLayout {
    /// Requires `3 <= V <= N/8`.
    pub fn new(v_count: usize, dataset_size: usize) -> Result<Self, PartitionError> {
        if v_count < 3 || 8 * v_count > dataset_size {
            return Err(PartitionError::InvalidV {
                v_count,
                n: dataset_size,
            });
        }
        let k0 = k0_level(v_count)?;
        debug_assert!(3 * (1usize << k0) <= 8 * v_count);
        Ok(Self {
            v_count,
            k0,
            dataset_size,
        })
    }

    pub fn v_count(&self) -> usize {
        self.v_count
    }

    pub fn k0(&self) -> u32 {
        self.k0
    }

    pub fn dataset_size(&self) -> usize {
        self.dataset_size
    }

    /// Number of blocks in the comparison partition, `2^K0`.
    pub fn block_count(&self) -> usize {
        1usize << self.k0
    }

    /// 0-based row range of comparison block `k` (1-based).
    pub fn block_range(&self, k: usize) -> Range<usize> {
        BlockId::new(self.k0, k).range_unchecked(self.dataset_size)
    }
}

fn disjoint(a: &Range<usize>, b: &Range<usize>) -> bool {
    a.end <= b.start || b.end <= a.start
}

/// Ascending 1-based indices of the `K0`-blocks disjoint from both `b1` and `b2`.
pub fn eligible_k0_blocks(
    b1: BlockId,
    b2: BlockId,
    layout: &ComparisonLayout,
) -> Result<Vec<usize>, PartitionError> {
    let n = layout.dataset_size;
    let r1 = b1.range(n)?;
    let r2 = b2.range(n)?;
    let eligible: Vec<usize> = (1..=layout.block_count())
        .filter(|&k| {
            let r = layout.block_range(k);
            disjoint(&r, &r1) && disjoint(&r, &r2)
        })
        .collect();
    if eligible.len() < layout.v_count {
        return Err(PartitionError::InfeasibleLayout {
            b1,
            b2,
            eligible: eligible.len(),
            v_count: layout.v_count,
        });
    }
    Ok(eligible)
}

/// The first `V` eligible `K0`-blocks, i.e. the comparison blocks `T_1..T_V`.
pub fn comparison_blocks(
    b1: BlockId,
    b2: BlockId,
    layout: &ComparisonLayout,
) -> Result<Vec<BlockId>, PartitionError> {
    let mut eligible = eligible_k0_blocks(b1, b2, layout)?;
    eligible.truncate(layout.v_count);
    Ok(eligible
        .into_iter()
        .map(|k| BlockId::new(layout.k0, k))
        .collect())
}

/// Source of median-of-means comparison blocks.
///
/// Implementations expose a fixed family of evaluation cells (row ranges) on
/// which every candidate's risk is computed once, and for each pair of training
/// blocks the `V` cells used to compare them. Returned cells must be disjoint
/// from both training blocks, pairwise disjoint, and hold at least `N/(4V)`
/// rows each.
pub trait BlockProvider: Sync {
    fn dataset_size(&self) -> usize;

    fn v_count(&self) -> usize;

    /// 0-based row ranges of the evaluation cells.
    fn cells(&self) -> Vec<Range<usize>>;

    /// 0-based cell positions used to compare candidates trained on `b1` and `b2`.
    fn comparison_cells(&self, b1: BlockId, b2: BlockId) -> Result<Vec<usize>, PartitionError>;
}

impl BlockProvider for ComparisonLayout {
    fn dataset_size(&self) -> usize {
        self.dataset_size
    }

    fn v_count(&self) -> usize {
        self.v_count
    }

    fn cells(&self) -> Vec<Range<usize>> {
        (1..=self.block_count())
            .map(|k| self.block_range(k))
            .collect()
    }

    fn comparison_cells(&self, b1: BlockId, b2: BlockId) -> Result<Vec<usize>, PartitionError> {
        let mut eligible = eligible_k0_blocks(b1, b2, self)?;
        eligible.truncate(self.v_count);
        Ok(eligible.into_iter().map(|k| k - 1).collect())
    }
}
