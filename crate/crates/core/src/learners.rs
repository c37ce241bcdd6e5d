//! Linear learners trained on a subsample: coordinate-descent LASSO and
//! least-squares ERM over a coordinate subspace.

use std::fmt;

use log::debug;
use nalgebra::{DMatrix, DMatrixView, DVector, DVectorView};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LearnError {
    #[error("training data contains non-finite values")]
    NonFinite,
    #[error("empty training block")]
    EmptyBlock,
    #[error("regularization weight {0} must be finite and nonnegative")]
    InvalidLambda(f64),
    #[error("invalid subspace: {0}")]
    InvalidSubspace(String),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("coordinate descent did not converge after {sweeps} sweeps (KKT violation {kkt_violation:e})")]
    Convergence { sweeps: usize, kkt_violation: f64 },
    #[error("least-squares solve failed: {0}")]
    Solve(String),
}

/// Coordinate-descent controls.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverSettings {
    /// A sweep converges when every coordinate moved by less than
    /// `tol * (1 + |beta_j|)`.
    pub tol: f64,
    pub max_sweeps: usize,
    /// Final KKT certificate: violation at most `kkt_tol * (1 + lambda_max)`.
    pub kkt_tol: f64,
    /// Rescale columns to unit mean square before fitting.
    pub standardize: bool,
    /// Record the objective after every sweep.
    pub track_objective: bool,
    /// Solve along the exact solution path when the sweeps do not converge.
    pub path_fallback: bool,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            tol: 1e-7,
            max_sweeps: 10_000,
            kkt_tol: 1e-7,
            standardize: false,
            track_objective: false,
            path_fallback: true,
        }
    }
}

/// A learning algorithm `G_lambda` mapping a subsample to a linear estimator.
#[derive(Debug, Clone, PartialEq)]
pub enum Learner {
    /// `argmin (1/|B|) sum (y - <beta, x>)^2 + lambda ||beta||_1`.
    Lasso { lambda: f64 },
    /// Least squares restricted to the listed (0-based) coordinates.
    Erm { subspace: Vec<usize> },
}

impl fmt::Display for Learner {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Learner::Lasso { lambda } => write!(f, "lasso(lambda={lambda})"),
            Learner::Erm { subspace } => write!(f, "erm(dim={})", subspace.len()),
        }
    }
}

impl Learner {
    pub fn validate(&self, d: usize) -> Result<(), LearnError> {
        match self {
            Learner::Lasso { lambda } => {
                if lambda.is_finite() && *lambda >= 0.0 {
                    Ok(())
                } else {
                    Err(LearnError::InvalidLambda(*lambda))
                }
            }
            Learner::Erm { subspace } => validate_subspace(subspace, d),
        }
    }

    pub fn lambda(&self) -> Option<f64> {
        match self {
            Learner::Lasso { lambda } => Some(*lambda),
            Learner::Erm { .. } => None,
        }
    }

    /// Trains on `(x, y)`. `warm` is used by the LASSO only.
    pub fn fit(
        &self,
        x: DMatrixView<'_, f64>,
        y: DVectorView<'_, f64>,
        settings: &SolverSettings,
        warm: Option<&[f64]>,
    ) -> Result<Estimator, LearnError> {
        match self {
            Learner::Lasso { lambda } => lasso_fit_warm(x, y, *lambda, settings, warm),
            Learner::Erm { subspace } => erm_fit(x, y, subspace),
        }
    }
}

/// Linear estimator `x -> <beta, x>`.
#[derive(Debug, Clone, PartialEq)]
pub struct Estimator {
    beta: Vec<f64>,
}

impl Estimator {
    pub fn new(beta: Vec<f64>) -> Self {
        Self { beta }
    }

    pub fn zeros(d: usize) -> Self {
        Self { beta: vec![0.0; d] }
    }

    pub fn beta(&self) -> &[f64] {
        &self.beta
    }

    pub fn into_beta(self) -> Vec<f64> {
        self.beta
    }

    pub fn dim(&self) -> usize {
        self.beta.len()
    }
}

/// `<beta, x>`, summed in ascending coordinate order over nonzero coefficients.
pub fn predict(est: &Estimator, x_row: &[f64]) -> Result<f64, LearnError> {
    if x_row.len() != est.beta.len() {
        return Err(LearnError::DimensionMismatch {
            expected: est.beta.len(),
            found: x_row.len(),
        });
    }
    Ok(dot_sparse(&est.beta, x_row.iter().copied()))
}

#[inline]
pub(crate) fn dot_sparse(beta: &[f64], x: impl Iterator<Item = f64>) -> f64 {
    let mut s = 0.0;
    for (b, v) in beta.iter().zip(x) {
        if *b != 0.0 {
            s += b * v;
        }
    }
    s
}

fn check_finite(x: &DMatrixView<'_, f64>, y: &DVectorView<'_, f64>) -> Result<(), LearnError> {
    if x.iter().chain(y.iter()).all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(LearnError::NonFinite)
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Column-major copy of a block.
struct Columns {
    n: usize,
    data: Vec<f64>,
}

impl Columns {
    fn new(x: &DMatrixView<'_, f64>) -> Self {
        let n = x.nrows();
        let mut data = Vec::with_capacity(n * x.ncols());
        for col in x.column_iter() {
            data.extend(col.iter());
        }
        Self { n, data }
    }

    fn col(&self, j: usize) -> &[f64] {
        &self.data[j * self.n..(j + 1) * self.n]
    }
}

/// `(1/n) ||y - X beta||^2 + lambda ||beta||_1`.
pub fn lasso_objective(
    x: DMatrixView<'_, f64>,
    y: DVectorView<'_, f64>,
    beta: &[f64],
    lambda: f64,
) -> f64 {
    let r = y - x * DVector::from_column_slice(beta);
    r.norm_squared() / y.len() as f64 + lambda * beta.iter().map(|b| b.abs()).sum::<f64>()
}

/// Smallest `lambda` with `beta = 0` optimal: `max_j |<x_j, y>| * 2 / n`.
pub fn lasso_lambda_max(x: DMatrixView<'_, f64>, y: DVectorView<'_, f64>) -> f64 {
    let n = y.len() as f64;
    let y: Vec<f64> = y.iter().copied().collect();
    x.column_iter()
        .map(|c| {
            let c: Vec<f64> = c.iter().copied().collect();
            dot(&c, &y).abs() * 2.0 / n
        })
        .fold(0.0, f64::max)
}

/// Largest violation of the LASSO subgradient conditions at `beta`:
/// `(2/n) <x_j, r> = lambda sign(beta_j)` on the support and
/// `|(2/n) <x_j, r>| <= lambda` off it, with `r = y - X beta`.
pub fn lasso_kkt_violation(
    x: DMatrixView<'_, f64>,
    y: DVectorView<'_, f64>,
    beta: &[f64],
    lambda: f64,
) -> f64 {
    let n = y.len() as f64;
    let r = y - x * DVector::from_column_slice(beta);
    x.column_iter()
        .zip(beta)
        .map(|(c, &b)| {
            let g = 2.0 * c.dot(&r) / n;
            if b != 0.0 {
                (g - lambda * b.signum()).abs()
            } else {
                (g.abs() - lambda).max(0.0)
            }
        })
        .fold(0.0, f64::max)
}

/// Per-fit solver diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct LassoReport {
    pub sweeps: usize,
    pub kkt_violation: f64,
    /// Objective after each sweep, when tracking is enabled.
    pub objective_trace: Vec<f64>,
}

pub fn lasso_fit(
    x: DMatrixView<'_, f64>,
    y: DVectorView<'_, f64>,
    lambda: f64,
    settings: &SolverSettings,
) -> Result<Estimator, LearnError> {
    lasso_fit_report(x, y, lambda, settings, None).map(|(e, _)| e)
}

pub fn lasso_fit_warm(
    x: DMatrixView<'_, f64>,
    y: DVectorView<'_, f64>,
    lambda: f64,
    settings: &SolverSettings,
    warm: Option<&[f64]>,
) -> Result<Estimator, LearnError> {
    lasso_fit_report(x, y, lambda, settings, warm).map(|(e, _)| e)
}

/// Cyclic coordinate descent with soft-thresholding.
///
/// The coordinate minimizer is `beta_j = S(rho_j, n lambda / 2) / ||x_j||^2`
/// with `rho_j = <x_j, r> + ||x_j||^2 beta_j`; `beta_j` is set to zero exactly
/// when `|rho_j| * 2 / n <= lambda`, so a cold start at
/// `lambda >= lasso_lambda_max` returns the zero vector.
///
/// A sweep set counts as converged when every coordinate moved by less than
/// `tol * (1 + |beta_j|)` and the KKT violation is at most
/// `kkt_tol * (1 + lambda_max)`. If that does not happen within `max_sweeps`,
/// the exact piecewise-linear solution path is followed from `lambda_max`
/// down to `lambda` and accepted under the same KKT check. Nearly
/// interpolating fits (more features than rows, one extreme response) need
/// this.
pub fn lasso_fit_report(
    x: DMatrixView<'_, f64>,
    y: DVectorView<'_, f64>,
    lambda: f64,
    settings: &SolverSettings,
    warm: Option<&[f64]>,
) -> Result<(Estimator, LassoReport), LearnError> {
    let (n, d) = x.shape();
    if y.len() != n {
        return Err(LearnError::DimensionMismatch {
            expected: n,
            found: y.len(),
        });
    }
    if n == 0 {
        return Err(LearnError::EmptyBlock);
    }
    if !(lambda.is_finite() && lambda >= 0.0) {
        return Err(LearnError::InvalidLambda(lambda));
    }
    check_finite(&x, &y)?;
    if let Some(w) = warm {
        if w.len() != d {
            return Err(LearnError::DimensionMismatch {
                expected: d,
                found: w.len(),
            });
        }
    }

    let mut cols = Columns::new(&x);
    let mut scale = vec![1.0; d];
    if settings.standardize {
        for (j, s) in scale.iter_mut().enumerate() {
            let ms = cols.col(j).iter().map(|v| v * v).sum::<f64>() / n as f64;
            if ms > 0.0 {
                *s = ms.sqrt();
                let inv = 1.0 / *s;
                cols.data[j * n..(j + 1) * n]
                    .iter_mut()
                    .for_each(|v| *v *= inv);
            }
        }
    }
    let problem = Problem {
        cols: &cols,
        norms: (0..d).map(|j| dot(cols.col(j), cols.col(j))).collect(),
        y: y.iter().copied().collect(),
        lambda,
    };
    let lambda_max = (0..d)
        .map(|j| dot(cols.col(j), &problem.y).abs() * 2.0 / n as f64)
        .fold(0.0, f64::max);
    let kkt_limit = settings.kkt_tol * (1.0 + lambda_max);
    let unscale = |beta: Vec<f64>| -> Estimator {
        Estimator::new(beta.iter().zip(&scale).map(|(b, s)| b / s).collect())
    };

    let start = match warm {
        Some(w) => w.iter().zip(&scale).map(|(b, s)| b * s).collect(),
        None => vec![0.0; d],
    };
    let mut trace = Vec::new();
    let cd = problem.descend(start, settings, kkt_limit, &mut trace);
    let (beta, sweeps, violation) = match cd {
        Ok(done) => done,
        Err((beta, violation)) => {
            let path = settings.path_fallback.then(|| problem.homotopy()).flatten();
            let Some(path) = path else {
                return Err(LearnError::Convergence {
                    sweeps: settings.max_sweeps,
                    kkt_violation: violation,
                });
            };
            let v = problem.kkt(&problem.residual(&path), &path);
            if v <= kkt_limit {
                debug!(
                    "LASSO path solution accepted after {} sweeps (KKT {v:e})",
                    settings.max_sweeps
                );
                (path, settings.max_sweeps, v)
            } else {
                let (best, bv) = if v < violation {
                    (path, v)
                } else {
                    (beta, violation)
                };
                return Err(LearnError::Convergence {
                    sweeps: settings.max_sweeps,
                    kkt_violation: bv.min(problem.kkt(&problem.residual(&best), &best)),
                });
            }
        }
    };
    Ok((
        unscale(beta),
        LassoReport {
            sweeps,
            kkt_violation: violation,
            objective_trace: trace,
        },
    ))
}

struct Problem<'a> {
    cols: &'a Columns,
    norms: Vec<f64>,
    y: Vec<f64>,
    lambda: f64,
}

impl Problem<'_> {
    fn n(&self) -> usize {
        self.cols.n
    }

    fn d(&self) -> usize {
        self.norms.len()
    }

    fn residual(&self, beta: &[f64]) -> Vec<f64> {
        let mut r = self.y.clone();
        for (j, &b) in beta.iter().enumerate() {
            if b != 0.0 {
                r.iter_mut()
                    .zip(self.cols.col(j))
                    .for_each(|(ri, xi)| *ri -= b * xi);
            }
        }
        r
    }

    fn objective(&self, r: &[f64], beta: &[f64]) -> f64 {
        dot(r, r) / self.n() as f64 + self.lambda * beta.iter().map(|b| b.abs()).sum::<f64>()
    }

    fn kkt(&self, r: &[f64], beta: &[f64]) -> f64 {
        let nf = self.n() as f64;
        (0..self.d())
            .map(|j| {
                let g = 2.0 * dot(self.cols.col(j), r) / nf;
                if beta[j] != 0.0 {
                    (g - self.lambda * beta[j].signum()).abs()
                } else {
                    (g.abs() - self.lambda).max(0.0)
                }
            })
            .fold(0.0, f64::max)
    }

    /// Coordinate descent. On failure returns the last iterate and its KKT
    /// violation.
    fn descend(
        &self,
        mut beta: Vec<f64>,
        settings: &SolverSettings,
        kkt_limit: f64,
        trace: &mut Vec<f64>,
    ) -> Result<(Vec<f64>, usize, f64), (Vec<f64>, f64)> {
        let nf = self.n() as f64;
        let half_n_lambda = self.lambda * nf / 2.0;
        let mut r = self.residual(&beta);
        if settings.track_objective {
            trace.push(self.objective(&r, &beta));
        }
        let mut violation = f64::INFINITY;
        for sweep in 1..=settings.max_sweeps {
            let mut converged = true;
            for j in 0..self.d() {
                let nj = self.norms[j];
                if nj == 0.0 {
                    continue;
                }
                let col = self.cols.col(j);
                let old = beta[j];
                let rho = dot(col, &r) + nj * old;
                let new = if rho.abs() * 2.0 / nf <= self.lambda {
                    0.0
                } else {
                    (rho - rho.signum() * half_n_lambda) / nj
                };
                let delta = new - old;
                if delta != 0.0 {
                    r.iter_mut().zip(col).for_each(|(ri, xi)| *ri -= delta * xi);
                    beta[j] = new;
                }
                if delta.abs() >= settings.tol * (1.0 + new.abs()) {
                    converged = false;
                }
            }
            if settings.track_objective {
                trace.push(self.objective(&r, &beta));
            }
            if converged {
                r = self.residual(&beta);
                violation = self.kkt(&r, &beta);
                if violation <= kkt_limit {
                    return Ok((beta, sweep, violation));
                }
            }
        }
        if !violation.is_finite() {
            violation = self.kkt(&self.residual(&beta), &beta);
        }
        Err((beta, violation))
    }

    /// Follows the solution path from `lambda_max` down to `lambda`, tracking
    /// the active set and signs. In the `c = X'r` scale the active
    /// correlations equal `t * sign(beta_j)` and the target is
    /// `t = n lambda / 2`. Returns `None` if an active Gram matrix becomes
    /// singular or the path does not terminate.
    fn homotopy(&self) -> Option<Vec<f64>> {
        let (n, d) = (self.n(), self.d());
        let target = self.lambda * n as f64 / 2.0;
        let mut beta = vec![0.0; d];
        let xty: Vec<f64> = (0..d).map(|j| dot(self.cols.col(j), &self.y)).collect();
        let (first, t0) = xty
            .iter()
            .enumerate()
            .map(|(j, c)| (j, c.abs()))
            .fold((0, 0.0), |a, b| if b.1 > a.1 { b } else { a });
        if t0 <= target {
            return Some(beta);
        }
        let mut t = t0;
        let mut active = vec![first];
        let mut signs = vec![xty[first].signum()];
        let mut last_dropped = None;
        for _ in 0..8 * (n + d) + 16 {
            let k = active.len();
            if k > n {
                return None;
            }
            let gram = DMatrix::from_fn(k, k, |a, b| {
                dot(self.cols.col(active[a]), self.cols.col(active[b]))
            });
            let chol = gram.cholesky()?;
            // Exact active coefficients at the current t, then the direction
            // in which they move as t decreases.
            let rhs = DVector::from_fn(k, |a, _| xty[active[a]] - t * signs[a]);
            let coef = chol.solve(&rhs);
            let w = chol.solve(&DVector::from_column_slice(&signs));
            if !coef.iter().chain(w.iter()).all(|v| v.is_finite()) {
                return None;
            }
            for (a, &j) in active.iter().enumerate() {
                beta[j] = coef[a];
            }
            let r = self.residual(&beta);
            let mut u = vec![0.0; n];
            for (a, &j) in active.iter().enumerate() {
                u.iter_mut()
                    .zip(self.cols.col(j))
                    .for_each(|(ui, xi)| *ui += w[a] * xi);
            }

            let mut step = t - target;
            let mut event: Option<(bool, usize, f64)> = None;
            // Correlations this close to the boundary are ties and join
            // immediately if they are moving outward.
            let tie = 1e-9 * t0;
            for j in 0..d {
                if active.contains(&j) || Some(j) == last_dropped || self.norms[j] == 0.0 {
                    continue;
                }
                let c = dot(self.cols.col(j), &r);
                let a = dot(self.cols.col(j), &u);
                for (sign, num, den) in [(1.0, t - c, 1.0 - a), (-1.0, t + c, 1.0 + a)] {
                    if den > 1e-12 {
                        let s = if num <= tie { 0.0 } else { num / den };
                        if s < step {
                            step = s;
                            event = Some((true, j, sign));
                        }
                    }
                }
            }
            for (a, &j) in active.iter().enumerate() {
                // Moving against its sign: leaves the active set at zero.
                if signs[a] * w[a] < 0.0 {
                    let s = (-beta[j] / w[a]).max(0.0);
                    if s < step {
                        step = s;
                        event = Some((false, a, 0.0));
                    }
                }
            }

            for (a, &j) in active.iter().enumerate() {
                beta[j] += step * w[a];
            }
            t -= step;
            match event {
                None => {
                    // t reached the target; refresh from the exact system.
                    let rhs = DVector::from_fn(k, |a, _| xty[active[a]] - target * signs[a]);
                    let coef = chol.solve(&rhs);
                    for (a, &j) in active.iter().enumerate() {
                        beta[j] = coef[a];
                    }
                    return Some(beta);
                }
                Some((true, j, sign)) => {
                    active.push(j);
                    signs.push(sign);
                    last_dropped = None;
                }
                Some((false, a, _)) => {
                    let j = active.remove(a);
                    signs.remove(a);
                    beta[j] = 0.0;
                    last_dropped = Some(j);
                }
            }
        }
        None
    }
}

fn validate_subspace(subspace: &[usize], d: usize) -> Result<(), LearnError> {
    if subspace.is_empty() {
        return Err(LearnError::InvalidSubspace("subspace is empty".into()));
    }
    let mut sorted = subspace.to_vec();
    sorted.sort_unstable();
    if let Some(&j) = sorted.iter().find(|&&j| j >= d) {
        return Err(LearnError::InvalidSubspace(format!(
            "coordinate {j} out of range for dimension {d}"
        )));
    }
    if let Some(w) = sorted.windows(2).find(|w| w[0] == w[1]) {
        return Err(LearnError::InvalidSubspace(format!(
            "coordinate {} repeated",
            w[0]
        )));
    }
    Ok(())
}

/// Least squares over the coordinates in `subspace`, zero elsewhere. Uses the
/// minimum-norm solution of an SVD when the restricted design is rank
/// deficient.
pub fn erm_fit(
    x: DMatrixView<'_, f64>,
    y: DVectorView<'_, f64>,
    subspace: &[usize],
) -> Result<Estimator, LearnError> {
    let (n, d) = x.shape();
    if y.len() != n {
        return Err(LearnError::DimensionMismatch {
            expected: n,
            found: y.len(),
        });
    }
    if n == 0 {
        return Err(LearnError::EmptyBlock);
    }
    validate_subspace(subspace, d)?;
    check_finite(&x, &y)?;

    let restricted = DMatrix::from_fn(n, subspace.len(), |i, k| x[(i, subspace[k])]);
    let svd = restricted.svd(true, true);
    let sigma_max = svd.singular_values.iter().copied().fold(0.0, f64::max);
    let eps = sigma_max * n.max(subspace.len()) as f64 * f64::EPSILON;
    let coef = svd
        .solve(&y.clone_owned(), eps)
        .map_err(|e| LearnError::Solve(e.to_string()))?;

    let mut beta = vec![0.0; d];
    for (k, &j) in subspace.iter().enumerate() {
        beta[j] = coef[k];
    }
    Ok(Estimator::new(beta))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn gaussian(n: usize, d: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DMatrix::from_fn(n, d, |_, _| rng.sample(StandardNormal))
    }

    #[test]
    fn path_matches_coordinate_descent() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        for seed in 0..30 {
            let (n, d) = (rng.random_range(10..60), rng.random_range(2..80));
            let x = gaussian(n, d, seed);
            let y = DVector::from_fn(n, |i, _| {
                x[(i, 0)] - 2.0 * x[(i, 1)] + rng.sample::<f64, _>(StandardNormal)
            });
            let lambda = lasso_lambda_max(x.as_view(), y.as_view()) * rng.random_range(0.05..0.9);
            let cols = Columns::new(&x.as_view());
            let problem = Problem {
                norms: (0..d).map(|j| dot(cols.col(j), cols.col(j))).collect(),
                cols: &cols,
                y: y.iter().copied().collect(),
                lambda,
            };
            let path = problem.homotopy().expect("path terminates");
            let v = lasso_kkt_violation(x.as_view(), y.as_view(), &path, lambda);
            assert!(v < 1e-8, "seed {seed}: KKT {v:e}");
            let cd =
                lasso_fit(x.as_view(), y.as_view(), lambda, &SolverSettings::default()).unwrap();
            let gap = lasso_objective(x.as_view(), y.as_view(), &path, lambda)
                - lasso_objective(x.as_view(), y.as_view(), cd.beta(), lambda);
            assert!(gap.abs() < 1e-8, "seed {seed}: objective gap {gap:e}");
        }
    }

    #[test]
    fn extreme_response_with_more_features_than_rows() {
        // One row of ones with a huge response, as a hard outlier in a small
        // block produces.
        for (n, d, seed) in [(16, 20, 3), (62, 100, 4), (25, 200, 5)] {
            let mut x = gaussian(n, d, seed);
            let noise = gaussian(n, 1, seed + 100);
            let mut y = DVector::from_fn(n, |i, _| x[(i, 0)] + x[(i, 1)] + noise[(i, 0)]);
            x.row_mut(n / 2).fill(1.0);
            y[n / 2] = 10000.0;
            for lambda in [(-1f64).exp(), 1.0] {
                let (est, rep) = lasso_fit_report(
                    x.as_view(),
                    y.as_view(),
                    lambda,
                    &SolverSettings::default(),
                    None,
                )
                .unwrap_or_else(|e| panic!("n={n} d={d} lambda={lambda}: {e}"));
                let lmax = lasso_lambda_max(x.as_view(), y.as_view());
                assert!(rep.kkt_violation <= 1e-7 * (1.0 + lmax));
                let v = lasso_kkt_violation(x.as_view(), y.as_view(), est.beta(), lambda);
                assert!(v <= 1e-7 * (1.0 + lmax), "n={n} d={d}: KKT {v:e}");
            }
        }
    }

    #[test]
    fn zero_solution_at_lambda_max() {
        let x = gaussian(40, 8, 1);
        let y = DVector::from_fn(40, |i, _| (i as f64).sin() * 3.0);
        let lam = lasso_lambda_max(x.as_view(), y.as_view());
        let est = lasso_fit(x.as_view(), y.as_view(), lam, &SolverSettings::default()).unwrap();
        assert!(est.beta().iter().all(|&b| b == 0.0));
        let est = lasso_fit(
            x.as_view(),
            y.as_view(),
            lam * 0.9,
            &SolverSettings::default(),
        )
        .unwrap();
        assert!(est.beta().iter().any(|&b| b != 0.0));
    }

    #[test]
    fn one_dimensional_soft_threshold() {
        // Objective (1/n) sum (y - b)^2 + |b| has minimizer mean(y) - 1/2.
        let x = DMatrix::from_element(6, 1, 1.0);
        let y = DVector::from_vec(vec![0.0, 2.0, 1.0, 1.5, 0.5, 1.0]);
        let est = lasso_fit(x.as_view(), y.as_view(), 1.0, &SolverSettings::default()).unwrap();
        assert_abs_diff_eq!(est.beta()[0], 0.5, epsilon = 1e-12);
    }

    #[test]
    fn unpenalized_interpolates() {
        let x = gaussian(30, 4, 2);
        let truth = DVector::from_vec(vec![1.0, -2.0, 0.5, 3.0]);
        let y = &x * &truth;
        let settings = SolverSettings {
            tol: 1e-12,
            ..SolverSettings::default()
        };
        let est = lasso_fit(x.as_view(), y.as_view(), 0.0, &settings).unwrap();
        for (b, t) in est.beta().iter().zip(truth.iter()) {
            assert_abs_diff_eq!(b, t, epsilon = 1e-8);
        }
    }

    #[test]
    fn objective_non_increasing_and_kkt_holds() {
        let x = gaussian(50, 120, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let y = DVector::from_fn(50, |i, _| {
            x.row(i).iter().take(5).sum::<f64>() + rng.sample::<f64, _>(StandardNormal)
        });
        let settings = SolverSettings {
            track_objective: true,
            ..SolverSettings::default()
        };
        let (est, report) =
            lasso_fit_report(x.as_view(), y.as_view(), 0.3, &settings, None).unwrap();
        for w in report.objective_trace.windows(2) {
            assert!(w[1] <= w[0] * (1.0 + 1e-12), "{} > {}", w[1], w[0]);
        }
        assert!(lasso_kkt_violation(x.as_view(), y.as_view(), est.beta(), 0.3) <= 1e-6);
    }

    #[test]
    fn warm_start_reaches_same_solution() {
        let x = gaussian(60, 20, 5);
        let y = DVector::from_fn(60, |i, _| x[(i, 0)] * 2.0 - x[(i, 3)]);
        let s = SolverSettings::default();
        let cold = lasso_fit(x.as_view(), y.as_view(), 0.2, &s).unwrap();
        let start = lasso_fit(x.as_view(), y.as_view(), 0.5, &s).unwrap();
        let warm = lasso_fit_warm(x.as_view(), y.as_view(), 0.2, &s, Some(start.beta())).unwrap();
        for (a, b) in cold.beta().iter().zip(warm.beta()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-5);
        }
    }

    #[test]
    fn standardize_flag_rescales() {
        let mut x = gaussian(40, 3, 6);
        x.column_mut(1).scale_mut(10.0);
        let y = DVector::from_fn(40, |i, _| x[(i, 0)] + 0.1 * x[(i, 1)]);
        let s = SolverSettings {
            standardize: true,
            ..SolverSettings::default()
        };
        let est = lasso_fit(x.as_view(), y.as_view(), 0.01, &s).unwrap();
        assert!(est.beta().iter().all(|b| b.is_finite()));
        assert_abs_diff_eq!(est.beta()[0], 1.0, epsilon = 0.05);
        assert_abs_diff_eq!(est.beta()[1], 0.1, epsilon = 0.005);
    }

    #[test]
    fn lasso_errors() {
        let x = gaussian(10, 2, 7);
        let mut y = DVector::from_element(10, 1.0);
        let s = SolverSettings::default();
        assert!(matches!(
            lasso_fit(x.as_view(), y.as_view(), -1.0, &s),
            Err(LearnError::InvalidLambda(_))
        ));
        y[3] = f64::NAN;
        assert_eq!(
            lasso_fit(x.as_view(), y.as_view(), 0.1, &s),
            Err(LearnError::NonFinite)
        );
        let y = DVector::from_fn(10, |i, _| i as f64);
        let tight = SolverSettings {
            max_sweeps: 1,
            tol: 1e-300,
            path_fallback: false,
            ..s
        };
        assert!(matches!(
            lasso_fit(x.as_view(), y.as_view(), 0.0, &tight),
            Err(LearnError::Convergence { sweeps: 1, .. })
        ));
        // The path solution rescues the same fit.
        let rescued = SolverSettings {
            path_fallback: true,
            ..tight
        };
        let est = lasso_fit(x.as_view(), y.as_view(), 0.0, &rescued).unwrap();
        assert!(lasso_kkt_violation(x.as_view(), y.as_view(), est.beta(), 0.0) < 1e-6);
    }

    #[test]
    fn erm_recovers_noiseless_truth() {
        let x = gaussian(30, 6, 8);
        let mut truth = DVector::zeros(6);
        truth[1] = 2.0;
        truth[4] = -1.5;
        let y = &x * &truth;
        let est = erm_fit(x.as_view(), y.as_view(), &[1, 4, 5]).unwrap();
        assert_abs_diff_eq!(est.beta()[1], 2.0, epsilon = 1e-10);
        assert_abs_diff_eq!(est.beta()[4], -1.5, epsilon = 1e-10);
        assert_abs_diff_eq!(est.beta()[5], 0.0, epsilon = 1e-10);
        assert_eq!(est.beta()[0], 0.0);
    }

    #[test]
    fn erm_orthogonal_response_is_zero() {
        let x = DMatrix::from_row_slice(4, 2, &[1.0, 0.0, 1.0, 0.0, 0.0, 1.0, 0.0, 1.0]);
        let y = DVector::from_vec(vec![1.0, -1.0, 0.0, 0.0]);
        let est = erm_fit(x.as_view(), y.as_view(), &[0]).unwrap();
        assert_abs_diff_eq!(est.beta()[0], 0.0, epsilon = 1e-14);
    }

    #[test]
    fn erm_rank_deficient_min_norm() {
        // Duplicate columns: min-norm splits the weight evenly.
        let base = gaussian(10, 1, 9);
        let x = DMatrix::from_fn(10, 2, |i, _| base[(i, 0)]);
        let y = DVector::from_fn(10, |i, _| 2.0 * base[(i, 0)]);
        let est = erm_fit(x.as_view(), y.as_view(), &[0, 1]).unwrap();
        assert_abs_diff_eq!(est.beta()[0], 1.0, epsilon = 1e-10);
        assert_abs_diff_eq!(est.beta()[1], 1.0, epsilon = 1e-10);

        // More coordinates than rows.
        let x = gaussian(3, 8, 10);
        let y = DVector::from_vec(vec![1.0, 2.0, 3.0]);
        let all: Vec<usize> = (0..8).collect();
        let est = erm_fit(x.as_view(), y.as_view(), &all).unwrap();
        let fitted = &x * DVector::from_column_slice(est.beta());
        assert_abs_diff_eq!((fitted - y).norm(), 0.0, epsilon = 1e-10);
    }

    #[test]
    fn erm_subspace_errors() {
        let x = gaussian(10, 3, 11);
        let y = DVector::from_element(10, 1.0);
        for bad in [vec![], vec![0, 0], vec![3]] {
            assert!(matches!(
                erm_fit(x.as_view(), y.as_view(), &bad),
                Err(LearnError::InvalidSubspace(_))
            ));
        }
    }

    #[test]
    fn predict_examples() {
        assert_eq!(
            predict(&Estimator::zeros(3), &[1.0, 2.0, 3.0]).unwrap(),
            0.0
        );
        let e1 = Estimator::new(vec![1.0, 0.0, 0.0]);
        assert_eq!(predict(&e1, &[3.0, 5.0, 7.0]).unwrap(), 3.0);
        assert!(matches!(
            predict(&e1, &[1.0]),
            Err(LearnError::DimensionMismatch {
                expected: 3,
                found: 1
            })
        ));
    }
}
