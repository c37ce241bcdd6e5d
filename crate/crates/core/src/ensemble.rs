//! Subsample ensemble: train every learner on every dyadic block of levels
//! `K_min..=K_max` and keep the minmax-MOM winner.

use log::{info, warn};
use nalgebra::{DMatrixView, DVectorView};
use rayon::prelude::*;
use thiserror::Error;

use crate::dataset::Dataset;
use crate::learners::{Estimator, LearnError, Learner, SolverSettings};
use crate::partition::{
    max_level, BlockId, BlockProvider, ComparisonLayout, PartitionError, MIN_LEVEL,
};
use crate::selection::{
    build_risk_table, minmax_select, CandidateId, SelectionError, SelectionResult,
};

#[derive(Debug, Error)]
pub enum EnsembleError {
    #[error("invalid ensemble config: {0}")]
    Config(String),
    #[error(transparent)]
    Partition(#[from] PartitionError),
    #[error("fit failed for candidate {candidate}: {source}")]
    Fit {
        candidate: CandidateId,
        source: LearnError,
    },
    #[error("every candidate fit failed")]
    NoCandidates,
    #[error(transparent)]
    Selection(#[from] SelectionError),
}

/// What to do when a single candidate fit fails.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FitFailurePolicy {
    #[default]
    Abort,
    /// Drop the candidate from the grid and log a warning. This changes the
    /// candidate set the selection guarantee refers to.
    Exclude,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleConfig {
    /// The learner grid, in candidate order.
    pub learners: Vec<Learner>,
    pub v_count: usize,
    pub k_min: u32,
    pub k_max: u32,
    pub settings: SolverSettings,
    pub on_fit_failure: FitFailurePolicy,
    /// Keep the full comparator matrix in the result.
    pub keep_comparator: bool,
    /// Train only on these blocks, each at a level in `k_min..=k_max`.
    /// `None` uses every block of those levels.
    pub blocks: Option<Vec<BlockId>>,
}

impl EnsembleConfig {
    /// Checks the config against a dataset of `n` rows and `d` features.
    /// Returns non-fatal warnings.
    pub fn validate(&self, n: usize, d: usize) -> Result<Vec<String>, EnsembleError> {
        if self.learners.is_empty() {
            return Err(EnsembleError::Config("learner grid is empty".into()));
        }
        for l in &self.learners {
            l.validate(d)
                .map_err(|e| EnsembleError::Config(format!("learner {l}: {e}")))?;
        }
        let top = max_level(n);
        if !(MIN_LEVEL <= self.k_min && self.k_min <= self.k_max && self.k_max <= top) {
            return Err(EnsembleError::Config(format!(
                "levels must satisfy 3 <= k_min <= k_max <= floor(log2 N) = {top}, got k_min = {}, k_max = {}",
                self.k_min, self.k_max
            )));
        }
        if self.v_count < 3 || 8 * self.v_count > n {
            return Err(EnsembleError::Config(format!(
                "V = {} must satisfy 3 <= V <= N/8 = {}",
                self.v_count,
                n / 8
            )));
        }
        self.check_blocks()?;
        let mut warnings = Vec::new();
        if self.v_count > 1 << (self.k_max - 1) {
            warnings.push(format!(
                "V = {} exceeds 2^(k_max-1) = {}; the subsample-ensemble rate bound assumes V <= 2^(k_max-1)",
                self.v_count,
                1u32 << (self.k_max - 1)
            ));
        }
        Ok(warnings)
    }

    /// Checks the explicit training block list, if any.
    pub fn check_blocks(&self) -> Result<(), EnsembleError> {
        let Some(blocks) = &self.blocks else {
            return Ok(());
        };
        if blocks.is_empty() {
            return Err(EnsembleError::Config("training block list is empty".into()));
        }
        for b in blocks {
            if !(self.k_min..=self.k_max).contains(&b.level)
                || b.index == 0
                || b.index > 1 << b.level
            {
                return Err(EnsembleError::Config(format!(
                    "training block {b} is not a block of levels {}..={}",
                    self.k_min, self.k_max
                )));
            }
        }
        let mut sorted = blocks.clone();
        sorted.sort();
        if let Some(w) = sorted.windows(2).find(|w| w[0] == w[1]) {
            return Err(EnsembleError::Config(format!(
                "training block {} listed twice",
                w[0]
            )));
        }
        Ok(())
    }

    /// The training blocks in level then index order.
    pub fn training_blocks(&self) -> Vec<BlockId> {
        match &self.blocks {
            Some(b) => {
                let mut b = b.clone();
                b.sort();
                b
            }
            None => training_blocks(self.k_min, self.k_max),
        }
    }
}

/// Training blocks `B_k^(K)` for `K_min <= K <= K_max`, level then index order.
pub fn training_blocks(k_min: u32, k_max: u32) -> Vec<BlockId> {
    (k_min..=k_max).flat_map(BlockId::level_blocks).collect()
}

/// `Lambda x B` in (learner, level, index) order.
pub fn build_grid(config: &EnsembleConfig, n: usize) -> Result<Vec<CandidateId>, EnsembleError> {
    let top = max_level(n);
    if !(MIN_LEVEL <= config.k_min && config.k_min <= config.k_max && config.k_max <= top) {
        return Err(EnsembleError::Config(format!(
            "levels must satisfy 3 <= k_min <= k_max <= {top}"
        )));
    }
    if config.learners.is_empty() {
        return Err(EnsembleError::Config("learner grid is empty".into()));
    }
    config.check_blocks()?;
    let blocks = config.training_blocks();
    Ok((0..config.learners.len())
        .flat_map(|l| {
            blocks.iter().map(move |&block| CandidateId {
                learner_index: l,
                block,
            })
        })
        .collect())
}

/// Fits every learner on one sample, results in learner order. LASSO
/// learners run in decreasing-lambda order, each warm-started from the
/// previous LASSO fit on the same sample.
pub fn fit_learners(
    x: DMatrixView<'_, f64>,
    y: DVectorView<'_, f64>,
    learners: &[Learner],
    settings: &SolverSettings,
) -> Vec<Result<Estimator, LearnError>> {
    let mut out: Vec<Option<Result<Estimator, LearnError>>> = vec![None; learners.len()];

    let mut lasso: Vec<usize> = (0..learners.len())
        .filter(|&i| learners[i].lambda().is_some())
        .collect();
    lasso.sort_by(|&a, &b| {
        let la = learners[a].lambda().unwrap_or(0.0);
        let lb = learners[b].lambda().unwrap_or(0.0);
        lb.total_cmp(&la).then(a.cmp(&b))
    });
    let mut warm: Option<Estimator> = None;
    for i in lasso {
        let fit = learners[i].fit(x, y, settings, warm.as_ref().map(|e| e.beta()));
        warm = fit.as_ref().ok().cloned();
        out[i] = Some(fit);
    }
    for (i, l) in learners.iter().enumerate() {
        if out[i].is_none() {
            out[i] = Some(l.fit(x, y, settings, None));
        }
    }
    out.into_iter()
        .map(|r| r.expect("every learner fitted"))
        .collect()
}

fn fit_block(
    data: &Dataset,
    block: BlockId,
    learners: &[Learner],
    settings: &SolverSettings,
) -> Vec<Result<Estimator, LearnError>> {
    let (x, y) = data.rows(block.range_unchecked(data.len()));
    fit_learners(x, y, learners, settings)
}

/// Trains the full grid; results in [`build_grid`] order.
pub fn train_grid(
    data: &Dataset,
    config: &EnsembleConfig,
) -> Result<Vec<(CandidateId, Result<Estimator, LearnError>)>, EnsembleError> {
    let grid = build_grid(config, data.len())?;
    let blocks = config.training_blocks();
    let mut per_block: Vec<Vec<Result<Estimator, LearnError>>> = blocks
        .par_iter()
        .map(|&b| fit_block(data, b, &config.learners, &config.settings))
        .collect();
    let nb = blocks.len();
    let mut fits = Vec::with_capacity(grid.len());
    for (pos, cand) in grid.into_iter().enumerate() {
        let (l, b) = (pos / nb, pos % nb);
        debug_assert_eq!(cand.block, blocks[b]);
        let fit = std::mem::replace(&mut per_block[b][l], Err(LearnError::EmptyBlock));
        fits.push((cand, fit));
    }
    Ok(fits)
}

#[derive(Debug, Clone)]
pub struct EnsembleOutcome {
    /// Candidates that entered selection, in grid order.
    pub candidates: Vec<CandidateId>,
    pub estimators: Vec<Estimator>,
    pub excluded: Vec<(CandidateId, LearnError)>,
    pub selection: SelectionResult,
    pub layout: ComparisonLayout,
    /// Block risks computed for the risk table.
    pub risk_evaluations: usize,
    pub warnings: Vec<String>,
}

impl EnsembleOutcome {
    pub fn selected(&self) -> CandidateId {
        self.selection.chosen_id
    }

    pub fn selected_estimator(&self) -> &Estimator {
        &self.estimators[self.selection.chosen]
    }
}

pub fn run_ensemble(
    data: &Dataset,
    config: &EnsembleConfig,
) -> Result<EnsembleOutcome, EnsembleError> {
    let mut warnings = config.validate(data.len(), data.dim())?;
    for w in &warnings {
        warn!("{w}");
    }
    info!(
        "V = {} tolerates up to {} outliers (V >= 3|O|)",
        config.v_count,
        config.v_count / 3
    );
    let layout = ComparisonLayout::new(config.v_count, data.len())?;

    let mut candidates = Vec::new();
    let mut estimators = Vec::new();
    let mut excluded = Vec::new();
    for (cand, fit) in train_grid(data, config)? {
        match fit {
            Ok(e) => {
                candidates.push(cand);
                estimators.push(e);
            }
            Err(source) => match config.on_fit_failure {
                FitFailurePolicy::Abort => {
                    return Err(EnsembleError::Fit {
                        candidate: cand,
                        source,
                    })
                }
                FitFailurePolicy::Exclude => {
                    let msg = format!("excluding candidate {cand}: {source}");
                    warn!("{msg}");
                    warnings.push(msg);
                    excluded.push((cand, source));
                }
            },
        }
    }
    if candidates.is_empty() {
        return Err(EnsembleError::NoCandidates);
    }

    let table = build_risk_table(&candidates, &estimators, data, &layout)?;
    let selection = minmax_select(&table, &layout, config.keep_comparator)?;
    Ok(EnsembleOutcome {
        candidates,
        estimators,
        excluded,
        selection,
        layout,
        risk_evaluations: table.evaluations(),
        warnings,
    })
}

/// True when every comparison cell used for any pair of `candidates` is
/// disjoint from both training blocks.
pub fn comparisons_avoid_training<P: BlockProvider + ?Sized>(
    candidates: &[CandidateId],
    provider: &P,
) -> Result<bool, PartitionError> {
    let n = provider.dataset_size();
    let cells = provider.cells();
    let mut blocks: Vec<BlockId> = candidates.iter().map(|c| c.block).collect();
    blocks.sort_unstable();
    blocks.dedup();
    for &a in &blocks {
        let ra = a.range(n)?;
        for &b in &blocks {
            let rb = b.range(n)?;
            for c in provider.comparison_cells(a, b)? {
                let r = &cells[c];
                let hits = |t: &std::ops::Range<usize>| r.start < t.end && t.start < r.end;
                if hits(&ra) || hits(&rb) {
                    return Ok(false);
                }
            }
        }
    }
    Ok(true)
}
