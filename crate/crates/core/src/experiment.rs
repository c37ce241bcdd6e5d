//! Outlier-sweep study on synthetic data with known `beta0`.
//!
//! Each `(|O|, repetition)` pair draws a fresh dataset, runs the ensemble and
//! scores the selected candidate against the oracle candidate and the best
//! estimator trained on the whole sample.

use std::collections::{BTreeMap, HashMap};
use std::fs::{self, File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::mpsc;

use log::{info, warn};
use rayon::prelude::*;
use thiserror::Error;

use crate::dataset::{generate_synthetic, Dataset, DatasetError, SyntheticSpec, RNG_NAME};
use crate::ensemble::{
    fit_learners, run_ensemble, EnsembleConfig, EnsembleError, FitFailurePolicy,
};
use crate::learners::{Estimator, Learner};
use crate::selection::CandidateId;
use crate::textfmt::g17;

pub const RECORDS_FILE: &str = "records.csv";
pub const AGGREGATE_FILE: &str = "aggregate.csv";
pub const RUN_INFO_FILE: &str = "run_info.txt";
pub const RECORDS_HEADER: &str =
    "outliers,rep,err_selected,err_oracle,err_best_basic,clean_subsamples,hard_in_sel,heavy_in_sel,seed";
pub const AGGREGATE_HEADER: &str = "outliers,metric,mean,ci95";
pub const DEFAULT_REPETITIONS: usize = 100;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("dimension mismatch: beta has {found} entries, beta0 has {expected}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("no candidates to choose from")]
    NoCandidates,
    #[error("ground truth is required")]
    MissingGroundTruth,
    #[error("invalid experiment config: {0}")]
    Config(String),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Ensemble(#[from] EnsembleError),
    #[error("basic estimator {learner} failed to fit: {source}")]
    BasicFit {
        learner: usize,
        source: crate::learners::LearnError,
    },
    #[error("every basic estimator failed to fit")]
    NoBasicEstimator,
    #[error("{path}: {message}")]
    Resume { path: PathBuf, message: String },
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

/// `||beta - beta0||^2`, the excess risk under isotropic features.
pub fn true_excess_risk(beta: &[f64], beta0: &[f64]) -> Result<f64, ExperimentError> {
    if beta.len() != beta0.len() {
        return Err(ExperimentError::DimensionMismatch {
            expected: beta0.len(),
            found: beta.len(),
        });
    }
    Ok(beta.iter().zip(beta0).map(|(a, b)| (a - b) * (a - b)).sum())
}

/// Position, id and risk of the candidate closest to `beta0`; ties go to the
/// smallest id.
pub fn oracle_candidate(
    candidates: &[CandidateId],
    estimators: &[Estimator],
    beta0: Option<&[f64]>,
) -> Result<(usize, CandidateId, f64), ExperimentError> {
    let beta0 = beta0.ok_or(ExperimentError::MissingGroundTruth)?;
    if candidates.is_empty() || candidates.len() != estimators.len() {
        return Err(ExperimentError::NoCandidates);
    }
    let mut best: Option<(usize, CandidateId, f64)> = None;
    for (i, (c, e)) in candidates.iter().zip(estimators).enumerate() {
        let r = true_excess_risk(e.beta(), beta0)?;
        let better = match best {
            None => true,
            Some((_, bc, br)) => r < br || (r == br && *c < bc),
        };
        if better {
            best = Some((i, *c, r));
        }
    }
    Ok(best.expect("non-empty"))
}

/// Trains every learner on the whole dataset and returns the index, estimator
/// and risk of the one closest to `beta0`. Ties go to the lower index.
pub fn best_basic(
    data: &Dataset,
    learners: &[Learner],
    config: &EnsembleConfig,
    beta0: Option<&[f64]>,
) -> Result<(usize, Estimator, f64), ExperimentError> {
    let beta0 = beta0.ok_or(ExperimentError::MissingGroundTruth)?;
    let (x, y) = data.rows(0..data.len());
    let mut best: Option<(usize, Estimator, f64)> = None;
    for (i, fit) in fit_learners(x, y, learners, &config.settings)
        .into_iter()
        .enumerate()
    {
        let est = match fit {
            Ok(e) => e,
            Err(e) => match config.on_fit_failure {
                FitFailurePolicy::Abort => {
                    return Err(ExperimentError::BasicFit {
                        learner: i,
                        source: e,
                    })
                }
                FitFailurePolicy::Exclude => {
                    warn!("basic estimator {i} excluded: {e}");
                    continue;
                }
            },
        };
        let r = true_excess_risk(est.beta(), beta0)?;
        if best.as_ref().is_none_or(|(_, _, br)| r < *br) {
            best = Some((i, est, r));
        }
    }
    best.ok_or(ExperimentError::NoBasicEstimator)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    /// Template; `n_outliers` and `seed` are set per repetition.
    pub synthetic: SyntheticSpec,
    pub ensemble: EnsembleConfig,
    pub outlier_grid: Vec<usize>,
    pub repetitions: usize,
    pub seed: u64,
    pub output_dir: PathBuf,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), ExperimentError> {
        if self.outlier_grid.is_empty() {
            return Err(ExperimentError::Config("outlier_grid is empty".into()));
        }
        if self.repetitions == 0 {
            return Err(ExperimentError::Config(
                "repetitions must be positive".into(),
            ));
        }
        let mut seen = std::collections::HashSet::new();
        for &o in &self.outlier_grid {
            if o % 2 != 0 || o >= self.synthetic.n {
                return Err(ExperimentError::Config(format!(
                    "outlier count {o} must be even and below n = {}",
                    self.synthetic.n
                )));
            }
            if !seen.insert(o) {
                return Err(ExperimentError::Config(format!(
                    "outlier count {o} repeated"
                )));
            }
        }
        for &o in &self.outlier_grid {
            SyntheticSpec {
                n_outliers: o,
                ..self.synthetic.clone()
            }
            .validate()?;
        }
        self.ensemble
            .validate(self.synthetic.n, self.synthetic.d)
            .map_err(ExperimentError::Ensemble)?;
        Ok(())
    }

    /// `(outliers, rep)` pairs in output order.
    pub fn jobs(&self) -> Vec<(usize, usize)> {
        self.outlier_grid
            .iter()
            .flat_map(|&o| (0..self.repetitions).map(move |r| (o, r)))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentRecord {
    pub outliers: usize,
    pub rep: usize,
    pub err_selected: f64,
    pub err_oracle: f64,
    pub err_best_basic: f64,
    /// Training blocks that contain no outlier.
    pub clean_subsamples: usize,
    pub hard_in_selected: usize,
    pub heavy_in_selected: usize,
    pub seed: u64,
}

impl ExperimentRecord {
    pub fn to_csv_line(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{}",
            self.outliers,
            self.rep,
            g17(self.err_selected),
            g17(self.err_oracle),
            g17(self.err_best_basic),
            self.clean_subsamples,
            self.hard_in_selected,
            self.heavy_in_selected,
            self.seed
        )
    }

    pub fn parse_csv_line(line: &str) -> Option<Self> {
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 9 {
            return None;
        }
        Some(Self {
            outliers: f[0].parse().ok()?,
            rep: f[1].parse().ok()?,
            err_selected: f[2].parse().ok()?,
            err_oracle: f[3].parse().ok()?,
            err_best_basic: f[4].parse().ok()?,
            clean_subsamples: f[5].parse().ok()?,
            hard_in_selected: f[6].parse().ok()?,
            heavy_in_selected: f[7].parse().ok()?,
            seed: f[8].parse().ok()?,
        })
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Dataset seed for one repetition.
pub fn derive_seed(master: u64, outliers: usize, rep: usize) -> u64 {
    let h = splitmix64(master);
    let h = splitmix64(h ^ outliers as u64);
    splitmix64(h ^ (rep as u64).rotate_left(32))
}

/// Runs one `(|O|, rep)` cell of the sweep.
pub fn run_repetition(
    config: &ExperimentConfig,
    outliers: usize,
    rep: usize,
) -> Result<ExperimentRecord, ExperimentError> {
    let seed = derive_seed(config.seed, outliers, rep);
    let spec = SyntheticSpec {
        n_outliers: outliers,
        seed,
        ..config.synthetic.clone()
    };
    let (data, beta0) = generate_synthetic(&spec)?;
    let out = run_ensemble(&data, &config.ensemble)?;
    let err_selected = true_excess_risk(out.selected_estimator().beta(), &beta0)?;
    let (_, _, err_oracle) = oracle_candidate(&out.candidates, &out.estimators, Some(&beta0))?;
    let (_, _, err_best_basic) = best_basic(
        &data,
        &config.ensemble.learners,
        &config.ensemble,
        Some(&beta0),
    )?;

    let n = data.len();
    let clean_subsamples = config
        .ensemble
        .training_blocks()
        .into_iter()
        .filter(|b| {
            let (h, t) = data
                .outlier_counts(b.range(n).expect("valid block"))
                .unwrap_or((0, 0));
            h + t == 0
        })
        .count();
    let sel = out.selected().block.range(n).expect("valid block");
    let (hard_in_selected, heavy_in_selected) = data.outlier_counts(sel).unwrap_or((0, 0));
    debug_assert!(err_selected >= err_oracle);
    Ok(ExperimentRecord {
        outliers,
        rep,
        err_selected,
        err_oracle,
        err_best_basic,
        clean_subsamples,
        hard_in_selected,
        heavy_in_selected,
        seed,
    })
}

/// Mean and normal-approximation 95% half-width of one metric at one
/// outlier count.
#[derive(Debug, Clone, PartialEq)]
pub struct Aggregate {
    pub outliers: usize,
    pub metric: &'static str,
    pub mean: f64,
    /// `1.96 sd / sqrt(reps)` with the `n - 1` sample sd; NaN for one rep.
    pub ci95: f64,
}

pub const METRICS: [&str; 6] = [
    "err_selected",
    "err_oracle",
    "err_best_basic",
    "clean_subsamples",
    "hard_in_sel",
    "heavy_in_sel",
];

fn metric(r: &ExperimentRecord, name: &str) -> f64 {
    match name {
        "err_selected" => r.err_selected,
        "err_oracle" => r.err_oracle,
        "err_best_basic" => r.err_best_basic,
        "clean_subsamples" => r.clean_subsamples as f64,
        "hard_in_sel" => r.hard_in_selected as f64,
        "heavy_in_sel" => r.heavy_in_selected as f64,
        _ => unreachable!("unknown metric {name}"),
    }
}

/// Aggregates in `grid` order, then [`METRICS`] order.
pub fn aggregate(records: &[ExperimentRecord], grid: &[usize]) -> Vec<Aggregate> {
    let mut out = Vec::new();
    for &o in grid {
        let group: Vec<&ExperimentRecord> = records.iter().filter(|r| r.outliers == o).collect();
        if group.is_empty() {
            continue;
        }
        let k = group.len() as f64;
        for name in METRICS {
            let vals: Vec<f64> = group.iter().map(|r| metric(r, name)).collect();
            let mean = vals.iter().sum::<f64>() / k;
            let ci95 = if group.len() < 2 {
                f64::NAN
            } else {
                let var = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (k - 1.0);
                1.96 * var.sqrt() / k.sqrt()
            };
            out.push(Aggregate {
                outliers: o,
                metric: name,
                mean,
                ci95,
            });
        }
    }
    out
}

pub fn write_aggregate<W: Write>(aggs: &[Aggregate], out: &mut W) -> std::io::Result<()> {
    writeln!(out, "{AGGREGATE_HEADER}")?;
    for a in aggs {
        writeln!(
            out,
            "{},{},{},{}",
            a.outliers,
            a.metric,
            g17(a.mean),
            g17(a.ci95)
        )?;
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct SweepSummary {
    /// All records of the sweep in output order.
    pub records: Vec<ExperimentRecord>,
    /// Records found on disk and reused.
    pub resumed: usize,
    pub aggregates: Vec<Aggregate>,
}

/// Reads complete, well-formed records from an earlier run. A torn final line
/// is dropped; anything else that does not fit this config is an error.
fn load_existing(
    path: &Path,
    config: &ExperimentConfig,
) -> Result<HashMap<(usize, usize), ExperimentRecord>, ExperimentError> {
    let mut found = HashMap::new();
    let text = match fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(found),
        Err(e) => return Err(e.into()),
    };
    let resume_err = |message: String| ExperimentError::Resume {
        path: path.to_path_buf(),
        message,
    };
    let complete = match text.rfind('\n') {
        Some(i) => &text[..=i],
        None => "",
    };
    let mut lines = complete.lines();
    match lines.next() {
        None => return Ok(found),
        Some(h) if h == RECORDS_HEADER => {}
        Some(h) => return Err(resume_err(format!("unexpected header `{h}`"))),
    }
    let wanted: std::collections::HashSet<(usize, usize)> = config.jobs().into_iter().collect();
    for (i, line) in lines.enumerate() {
        let r = ExperimentRecord::parse_csv_line(line)
            .ok_or_else(|| resume_err(format!("line {}: malformed record", i + 2)))?;
        let key = (r.outliers, r.rep);
        if !wanted.contains(&key) || r.seed != derive_seed(config.seed, r.outliers, r.rep) {
            return Err(resume_err(format!(
                "line {}: record (outliers {}, rep {}) belongs to a different configuration",
                i + 2,
                r.outliers,
                r.rep
            )));
        }
        if found.insert(key, r).is_some() {
            return Err(resume_err(format!("line {}: duplicate record", i + 2)));
        }
    }
    Ok(found)
}

fn write_records_file(path: &Path, records: &[ExperimentRecord]) -> std::io::Result<()> {
    let tmp = path.with_extension("csv.tmp");
    {
        let mut w = BufWriter::new(File::create(&tmp)?);
        writeln!(w, "{RECORDS_HEADER}")?;
        for r in records {
            writeln!(w, "{}", r.to_csv_line())?;
        }
        w.flush()?;
    }
    fs::rename(tmp, path)
}

fn run_info(config: &ExperimentConfig) -> String {
    let e = &config.ensemble;
    let learners: Vec<String> = e.learners.iter().map(|l| l.to_string()).collect();
    format!(
        "records: one row per (outliers, rep); errors are squared distances to beta0\n\
         aggregate ci95: normal approximation, 1.96 * sd / sqrt(reps), sd with n - 1 denominator; nan when reps = 1\n\
         rng: {RNG_NAME}; per-repetition seed = splitmix64 mix of (master seed, outliers, rep)\n\
         master_seed: {}\n\
         n: {}\nd: {}\nsparsity: {}\nnoise_sd: {}\n\
         outlier_grid: {:?}\nrepetitions: {}\n\
         v_count: {}\nk_min: {}\nk_max: {}\nlearners: [{}]\n",
        config.seed,
        config.synthetic.n,
        config.synthetic.d,
        config.synthetic.sparsity,
        g17(config.synthetic.noise_sd),
        config.outlier_grid,
        config.repetitions,
        e.v_count,
        e.k_min,
        e.k_max,
        learners.join(", ")
    )
}

/// Runs the full sweep, writing `records.csv`, `aggregate.csv` and
/// `run_info.txt` under `output_dir`. Records are appended in output order and
/// flushed one at a time; rerunning after an interruption reuses them.
pub fn run_sweep(config: &ExperimentConfig) -> Result<SweepSummary, ExperimentError> {
    config.validate()?;
    fs::create_dir_all(&config.output_dir)?;
    let records_path = config.output_dir.join(RECORDS_FILE);
    let mut existing = load_existing(&records_path, config)?;
    let jobs = config.jobs();
    let resumed = existing.len();
    if resumed > 0 {
        info!(
            "resuming: {resumed} of {} records already present",
            jobs.len()
        );
    }

    // Existing records first, in output order; the file is rewritten in
    // canonical order at the end if they were not a prefix.
    let done: Vec<ExperimentRecord> = jobs
        .iter()
        .filter_map(|k| existing.get(k).cloned())
        .collect();
    write_records_file(&records_path, &done)?;
    fs::write(config.output_dir.join(RUN_INFO_FILE), run_info(config))?;

    let todo: Vec<(usize, usize)> = jobs
        .iter()
        .copied()
        .filter(|k| !existing.contains_key(k))
        .collect();
    let prefix = jobs.iter().take(resumed).all(|k| existing.contains_key(k));

    let (tx, rx) = mpsc::channel::<(usize, Result<ExperimentRecord, ExperimentError>)>();
    let file = OpenOptions::new().append(true).open(&records_path)?;
    let total = todo.len();
    let writer = std::thread::spawn(move || -> Result<Vec<ExperimentRecord>, ExperimentError> {
        let mut w = BufWriter::new(file);
        let mut pending = BTreeMap::new();
        let mut next = 0;
        let mut written = Vec::with_capacity(total);
        for (i, rec) in rx {
            pending.insert(i, rec?);
            while let Some(r) = pending.remove(&next) {
                writeln!(w, "{}", r.to_csv_line())?;
                w.flush()?;
                written.push(r);
                next += 1;
            }
        }
        Ok(written)
    });

    todo.par_iter()
        .enumerate()
        .for_each_with(tx, |tx, (i, &(o, rep))| {
            let rec = run_repetition(config, o, rep);
            if let Ok(r) = &rec {
                info!(
                    "outliers {o} rep {rep}: selected {} oracle {} basic {}",
                    g17(r.err_selected),
                    g17(r.err_oracle),
                    g17(r.err_best_basic)
                );
            }
            // A closed channel means the writer already failed.
            let _ = tx.send((i, rec));
        });
    let new = writer.join().expect("writer thread panicked")?;

    for r in new {
        existing.insert((r.outliers, r.rep), r);
    }
    let records: Vec<ExperimentRecord> = jobs.iter().map(|k| existing[k].clone()).collect();
    if !prefix {
        write_records_file(&records_path, &records)?;
    }
    let aggregates = aggregate(&records, &config.outlier_grid);
    let mut w = BufWriter::new(File::create(config.output_dir.join(AGGREGATE_FILE))?);
    write_aggregate(&aggregates, &mut w)?;
    w.flush()?;
    Ok(SweepSummary {
        records,
        resumed,
        aggregates,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::BetaValues;
    use crate::learners::SolverSettings;

    #[test]
    fn true_risk_examples() {
        let b0 = vec![1.0; 20];
        assert_eq!(true_excess_risk(&b0, &b0).unwrap(), 0.0);
        let mut b = b0.clone();
        b[0] += 1.0;
        assert_eq!(true_excess_risk(&b, &b0).unwrap(), 1.0);
        assert_eq!(true_excess_risk(&[0.0; 20], &b0).unwrap(), 20.0);
        assert!(true_excess_risk(&[0.0; 3], &b0).is_err());
    }

    fn cid(l: usize, k: usize) -> CandidateId {
        CandidateId {
            learner_index: l,
            block: crate::partition::BlockId::new(3, k),
        }
    }

    #[test]
    fn oracle_examples() {
        let b0 = [1.0, 2.0];
        let one = [cid(0, 1)];
        let e = [Estimator::new(vec![0.0, 0.0])];
        assert_eq!(oracle_candidate(&one, &e, Some(&b0)).unwrap().1, cid(0, 1));
        assert!(oracle_candidate(&one, &e, None).is_err());

        let cands = [cid(0, 1), cid(0, 2), cid(1, 1)];
        let ests = [
            Estimator::new(vec![1.0, 1.0]),
            Estimator::new(vec![1.0, 2.0]),
            Estimator::new(vec![0.0, 2.0]),
        ];
        let (i, id, r) = oracle_candidate(&cands, &ests, Some(&b0)).unwrap();
        assert_eq!((i, id, r), (1, cid(0, 2), 0.0));
        // Ties resolve to the smallest id regardless of position.
        let cands = [cid(1, 1), cid(0, 2), cid(0, 1)];
        let ests = [
            Estimator::new(vec![1.0, 1.0]),
            Estimator::new(vec![0.0, 2.0]),
            Estimator::new(vec![1.0, 3.0]),
        ];
        let brute = (0..3)
            .min_by(|&a, &b| {
                let ra = true_excess_risk(ests[a].beta(), &b0).unwrap();
                let rb = true_excess_risk(ests[b].beta(), &b0).unwrap();
                ra.total_cmp(&rb).then(cands[a].cmp(&cands[b]))
            })
            .unwrap();
        assert_eq!(oracle_candidate(&cands, &ests, Some(&b0)).unwrap().0, brute);
        assert_eq!(brute, 2);
    }

    #[test]
    fn seeds_are_distinct() {
        let mut seen = std::collections::HashSet::new();
        for o in (0..40).step_by(2) {
            for r in 0..50 {
                assert!(seen.insert(derive_seed(7, o, r)));
            }
        }
        assert_eq!(derive_seed(7, 4, 3), derive_seed(7, 4, 3));
        assert_ne!(derive_seed(7, 4, 3), derive_seed(8, 4, 3));
    }

    #[test]
    fn aggregate_values() {
        let rec = |o, rep, e: f64| ExperimentRecord {
            outliers: o,
            rep,
            err_selected: e,
            err_oracle: e,
            err_best_basic: e,
            clean_subsamples: 1,
            hard_in_selected: 0,
            heavy_in_selected: 0,
            seed: 0,
        };
        let a = aggregate(&[rec(0, 0, 1.0), rec(0, 1, 3.0), rec(4, 0, 5.0)], &[0, 4]);
        assert_eq!(a.len(), 12);
        assert_eq!(a[0].mean, 2.0);
        assert!((a[0].ci95 - 1.96 * 2f64.sqrt() / 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(a[3].ci95, 0.0);
        assert!(a[6].ci95.is_nan());
        let line = rec(0, 1, 0.1).to_csv_line();
        assert_eq!(
            ExperimentRecord::parse_csv_line(&line).unwrap(),
            rec(0, 1, 0.1)
        );
    }

    fn small(dir: &Path, grid: Vec<usize>, reps: usize) -> ExperimentConfig {
        ExperimentConfig {
            synthetic: SyntheticSpec {
                n: 128,
                d: 10,
                sparsity: 3,
                n_outliers: 0,
                noise_sd: 1.0,
                seed: 0,
                beta: BetaValues::Ones,
            },
            ensemble: EnsembleConfig {
                learners: [0.3, 0.1, 0.03]
                    .iter()
                    .map(|&lambda| Learner::Lasso { lambda })
                    .collect(),
                v_count: 4,
                k_min: 3,
                k_max: 3,
                settings: SolverSettings::default(),
                on_fit_failure: FitFailurePolicy::Abort,
                keep_comparator: false,
                blocks: None,
            },
            outlier_grid: grid,
            repetitions: reps,
            seed: 11,
            output_dir: dir.to_path_buf(),
        }
    }

    #[test]
    fn sweep_cardinality_and_clean_blocks() {
        let dir = tempfile::tempdir().unwrap();
        let s = run_sweep(&small(dir.path(), vec![0], 2)).unwrap();
        assert_eq!(s.records.len(), 2);
        assert!(s.records.iter().all(|r| r.clean_subsamples == 8));
        assert!(s.records.iter().all(|r| r.err_selected >= r.err_oracle));

        let dir = tempfile::tempdir().unwrap();
        let s = run_sweep(&small(dir.path(), vec![0, 4], 1)).unwrap();
        assert_eq!(s.records.len(), 2);
        let agg = fs::read_to_string(dir.path().join(AGGREGATE_FILE)).unwrap();
        assert!(agg.starts_with(AGGREGATE_HEADER));
        assert!(agg.lines().nth(1).unwrap().ends_with(",nan"));
        for r in &s.records {
            assert!(r.hard_in_selected + r.heavy_in_selected <= 16);
        }
    }

    #[test]
    fn resume_skips_existing() {
        let dir = tempfile::tempdir().unwrap();
        let c = small(dir.path(), vec![0, 2], 3);
        run_sweep(&c).unwrap();
        let path = dir.path().join(RECORDS_FILE);
        let full = fs::read_to_string(&path).unwrap();

        // Keep the header, two records and a torn third line.
        let lines: Vec<&str> = full.lines().collect();
        let torn = format!(
            "{}\n{}\n{}\n{}",
            lines[0],
            lines[1],
            lines[2],
            &lines[3][..5]
        );
        fs::write(&path, torn).unwrap();
        let s = run_sweep(&c).unwrap();
        assert_eq!(s.resumed, 2);
        assert_eq!(fs::read_to_string(&path).unwrap(), full);

        // Non-prefix subset is restored to canonical order.
        let shuffled = format!("{}\n{}\n{}\n", lines[0], lines[5], lines[2]);
        fs::write(&path, shuffled).unwrap();
        run_sweep(&c).unwrap();
        assert_eq!(fs::read_to_string(&path).unwrap(), full);

        let other = ExperimentConfig { seed: 12, ..c };
        assert!(matches!(
            run_sweep(&other),
            Err(ExperimentError::Resume { .. })
        ));
    }

    #[test]
    fn config_validation() {
        let dir = tempfile::tempdir().unwrap();
        assert!(small(dir.path(), vec![3], 1).validate().is_err());
        assert!(small(dir.path(), vec![128], 1).validate().is_err());
        assert!(small(dir.path(), vec![], 1).validate().is_err());
        assert!(small(dir.path(), vec![0], 0).validate().is_err());
        assert!(small(dir.path(), vec![0, 0], 1).validate().is_err());
        assert!(small(dir.path(), vec![0, 64], 2).validate().is_ok());
    }
}
