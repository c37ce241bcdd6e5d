//! Block empirical risks, the median-of-means comparator and minmax selection.
//!
//! For candidates `m`, `m'` trained on blocks `B_m`, `B_m'`, the comparator is
//!
//! ```text
//! T(m, m') = median over v in [V] of  P_{T_v}[gamma(f_m)] - P_{T_v}[gamma(f_m')]
//! ```
//!
//! where `T_1..T_V` are cells of a shared partition that avoid both training
//! blocks and `P_B[gamma(f)]` is the mean squared error of `f` on `B`. The
//! selected candidate minimizes `max_{m'} T(m, m')`.

use std::collections::HashMap;
use std::fmt;
use std::io::Write;

use rayon::prelude::*;
use thiserror::Error;

use crate::dataset::Dataset;
use crate::learners::{dot_sparse, Estimator};
use crate::partition::{BlockId, BlockProvider, PartitionError};
use crate::textfmt::g17;

#[derive(Debug, Error)]
pub enum SelectionError {
    #[error(transparent)]
    Partition(#[from] PartitionError),
    #[error(
        "dimension mismatch: estimator has {estimator} coefficients, data has {data} features"
    )]
    DimensionMismatch { estimator: usize, data: usize },
    #[error("dataset size {data} differs from layout size {layout}")]
    SizeMismatch { data: usize, layout: usize },
    #[error("risk table shape: {0}")]
    TableShape(String),
    #[error("candidate set is empty")]
    EmptyCandidates,
    #[error("{0}")]
    Io(#[from] std::io::Error),
}

/// A candidate `m = (lambda, B)`: a learner index and a training block.
///
/// The derived order (learner, level, index) is the tie-breaking order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CandidateId {
    pub learner_index: usize,
    pub block: BlockId,
}

impl fmt::Display for CandidateId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "(learner {}, K = {}, k = {})",
            self.learner_index, self.block.level, self.block.index
        )
    }
}

/// Mean squared error of `est` on one block, summed in ascending row order.
pub fn empirical_risk(
    est: &Estimator,
    data: &Dataset,
    block: BlockId,
) -> Result<f64, SelectionError> {
    check_dim(est, data)?;
    let range = block.range(data.len())?;
    let len = range.len() as f64;
    let x = data.x();
    let y = data.y();
    let mut sum = 0.0;
    for i in range {
        let e = y[i] - dot_sparse(est.beta(), x.row(i).iter().copied());
        sum += e * e;
    }
    Ok(sum / len)
}

fn check_dim(est: &Estimator, data: &Dataset) -> Result<(), SelectionError> {
    if est.dim() != data.dim() {
        return Err(SelectionError::DimensionMismatch {
            estimator: est.dim(),
            data: data.dim(),
        });
    }
    Ok(())
}

/// Squared losses of `est` on every row. Per row, the prediction accumulates
/// nonzero coefficients in ascending coordinate order, matching
/// [`empirical_risk`] bit for bit.
fn row_losses(est: &Estimator, data: &Dataset) -> Vec<f64> {
    let x = data.x();
    let mut pred = vec![0.0; data.len()];
    for (j, &b) in est.beta().iter().enumerate() {
        if b != 0.0 {
            pred.iter_mut()
                .zip(x.column(j).iter())
                .for_each(|(p, v)| *p += b * v);
        }
    }
    pred.iter()
        .zip(data.y().iter())
        .map(|(p, y)| (y - p) * (y - p))
        .collect()
}

/// Risk of every candidate on every cell of the shared partition.
#[derive(Debug, Clone, PartialEq)]
pub struct RiskTable {
    candidates: Vec<CandidateId>,
    cells: usize,
    values: Vec<f64>,
    evaluations: usize,
}

impl RiskTable {
    /// Table from explicit row-major values, one row per candidate.
    pub fn from_values(
        candidates: Vec<CandidateId>,
        cells: usize,
        values: Vec<f64>,
    ) -> Result<Self, SelectionError> {
        if values.len() != candidates.len() * cells {
            return Err(SelectionError::TableShape(format!(
                "{} values for {} candidates x {cells} cells",
                values.len(),
                candidates.len()
            )));
        }
        if let Some(v) = values.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(SelectionError::TableShape(format!(
                "entry {v} is not a finite risk"
            )));
        }
        let evaluations = values.len();
        Ok(Self {
            candidates,
            cells,
            values,
            evaluations,
        })
    }

    pub fn candidates(&self) -> &[CandidateId] {
        &self.candidates
    }

    pub fn len(&self) -> usize {
        self.candidates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }

    pub fn cell_count(&self) -> usize {
        self.cells
    }

    /// Number of block risks computed to fill the table.
    pub fn evaluations(&self) -> usize {
        self.evaluations
    }

    pub fn get(&self, row: usize, cell: usize) -> f64 {
        self.values[row * self.cells + cell]
    }

    pub fn row(&self, row: usize) -> &[f64] {
        &self.values[row * self.cells..(row + 1) * self.cells]
    }
}

/// Fills the risk table: each estimator evaluated once per provider cell.
pub fn build_risk_table<P: BlockProvider + ?Sized>(
    candidates: &[CandidateId],
    estimators: &[Estimator],
    data: &Dataset,
    provider: &P,
) -> Result<RiskTable, SelectionError> {
    if candidates.len() != estimators.len() {
        return Err(SelectionError::TableShape(format!(
            "{} candidates but {} estimators",
            candidates.len(),
            estimators.len()
        )));
    }
    if provider.dataset_size() != data.len() {
        return Err(SelectionError::SizeMismatch {
            data: data.len(),
            layout: provider.dataset_size(),
        });
    }
    for est in estimators {
        check_dim(est, data)?;
    }
    let cells = provider.cells();
    let rows: Vec<(Vec<f64>, usize)> = estimators
        .par_iter()
        .map(|est| {
            let losses = row_losses(est, data);
            let mut count = 0;
            let row = cells
                .iter()
                .map(|r| {
                    count += 1;
                    losses[r.clone()].iter().sum::<f64>() / r.len() as f64
                })
                .collect();
            (row, count)
        })
        .collect();
    let evaluations = rows.iter().map(|(_, c)| c).sum();
    let values = rows.into_iter().flat_map(|(r, _)| r).collect();
    Ok(RiskTable {
        candidates: candidates.to_vec(),
        cells: cells.len(),
        values,
        evaluations,
    })
}

/// Median with the midpoint of the two central order statistics for even
/// lengths. Reorders `values`. Returns NaN for an empty slice.
pub fn median(values: &mut [f64]) -> f64 {
    let n = values.len();
    if n == 0 {
        return f64::NAN;
    }
    values.sort_unstable_by(f64::total_cmp);
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Median of the means of `blocks` contiguous, nearly equal blocks of `samples`.
pub fn median_of_means(samples: &[f64], blocks: usize) -> f64 {
    assert!(
        blocks >= 1 && blocks <= samples.len(),
        "need 1 <= blocks <= len"
    );
    let n = samples.len();
    let mut means: Vec<f64> = (0..blocks)
        .map(|k| {
            let s = &samples[k * n / blocks..(k + 1) * n / blocks];
            s.iter().sum::<f64>() / s.len() as f64
        })
        .collect();
    median(&mut means)
}

fn compare_on(table: &RiskTable, a: usize, b: usize, cells: &[usize]) -> f64 {
    let ra = table.row(a);
    let rb = table.row(b);
    let mut diffs: Vec<f64> = cells.iter().map(|&c| ra[c] - rb[c]).collect();
    median(&mut diffs)
}

/// `T(m, m')` for table rows `a` and `b`.
pub fn mom_compare<P: BlockProvider + ?Sized>(
    table: &RiskTable,
    a: usize,
    b: usize,
    provider: &P,
) -> Result<f64, SelectionError> {
    let ca = table.candidates[a];
    let cb = table.candidates[b];
    let cells = provider.comparison_cells(ca.block, cb.block)?;
    Ok(compare_on(table, a, b, &cells))
}

/// Dense `|M| x |M|` matrix of comparator values, row `m`, column `m'`.
#[derive(Debug, Clone, PartialEq)]
pub struct ComparatorMatrix {
    size: usize,
    values: Vec<f64>,
}

impl ComparatorMatrix {
    pub fn size(&self) -> usize {
        self.size
    }

    pub fn get(&self, m: usize, m2: usize) -> f64 {
        self.values[m * self.size + m2]
    }

    /// `m,m2,T` triples, rows as 0-based candidate positions.
    pub fn write_csv<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        writeln!(out, "m,m2,T")?;
        for m in 0..self.size {
            for m2 in 0..self.size {
                writeln!(out, "{m},{m2},{}", g17(self.get(m, m2)))?;
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectionResult {
    /// Row of the selected candidate in the table.
    pub chosen: usize,
    pub chosen_id: CandidateId,
    /// `min_m max_m' T(m, m')`.
    pub minmax_value: f64,
    /// Per-candidate `max_m' T(m, m')`.
    pub worst: Vec<f64>,
    /// Per-candidate rival attaining `worst`.
    pub worst_rival: Vec<usize>,
    pub comparator: Option<ComparatorMatrix>,
}

/// `argmin_m max_m' T(m, m')` with lexicographic tie-breaking on
/// [`CandidateId`] for both the inner argmax and the outer argmin.
pub fn minmax_select<P: BlockProvider + ?Sized>(
    table: &RiskTable,
    provider: &P,
    keep_matrix: bool,
) -> Result<SelectionResult, SelectionError> {
    let m = table.len();
    if m == 0 {
        return Err(SelectionError::EmptyCandidates);
    }
    let ids = table.candidates();

    let mut blocks: Vec<BlockId> = ids.iter().map(|c| c.block).collect();
    blocks.sort_unstable();
    blocks.dedup();
    let slot: HashMap<BlockId, usize> = blocks.iter().enumerate().map(|(i, b)| (*b, i)).collect();
    let u = blocks.len();
    let pair_cells: Vec<Vec<usize>> = (0..u * u)
        .into_par_iter()
        .map(|p| provider.comparison_cells(blocks[p / u], blocks[p % u]))
        .collect::<Result<_, _>>()?;
    let row_slot: Vec<usize> = ids.iter().map(|c| slot[&c.block]).collect();

    let rows: Vec<Vec<f64>> = (0..m)
        .into_par_iter()
        .map(|a| {
            (0..m)
                .map(|b| {
                    let cells = &pair_cells[row_slot[a] * u + row_slot[b]];
                    compare_on(table, a, b, cells)
                })
                .collect()
        })
        .collect();

    let mut worst = Vec::with_capacity(m);
    let mut worst_rival = Vec::with_capacity(m);
    for row in &rows {
        let mut best = 0;
        for b in 1..m {
            if row[b] > row[best] || (row[b] == row[best] && ids[b] < ids[best]) {
                best = b;
            }
        }
        worst.push(row[best]);
        worst_rival.push(best);
    }
    let mut chosen = 0;
    for a in 1..m {
        if worst[a] < worst[chosen] || (worst[a] == worst[chosen] && ids[a] < ids[chosen]) {
            chosen = a;
        }
    }
    let comparator = keep_matrix.then(|| ComparatorMatrix {
        size: m,
        values: rows.into_iter().flatten().collect(),
    });
    Ok(SelectionResult {
        chosen,
        chosen_id: ids[chosen],
        minmax_value: worst[chosen],
        worst,
        worst_rival,
        comparator,
    })
}
