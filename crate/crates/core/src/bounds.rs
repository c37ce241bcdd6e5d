//! Evaluators for the excess-risk guarantees of the minmax-MOM selector.
//!
//! These are diagnostics: the constants `c0`, `c1` and `||zeta||_{L_q}` are
//! unspecified absolute constants and default to 1. The values are
//! non-normative.

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum BoundsError {
    #[error("invalid bounds input `{field}`: {reason}")]
    Invalid { field: &'static str, reason: String },
    #[error("bounds input `{0}` is required here")]
    Missing(&'static str),
}

/// Inputs shared by every evaluator.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundsInput {
    /// L4/L2 norm-equivalence constant.
    pub chi: f64,
    /// Noise-interaction constant.
    pub sigma: f64,
    pub epsilon: f64,
    pub v_count: usize,
    pub n: usize,
    /// `|M|`, the number of candidates.
    pub grid_size: usize,
    pub c0: f64,
    pub c1: f64,
    pub zeta_norm: f64,
    pub sparsity: Option<usize>,
    pub dim: Option<usize>,
    pub chi_lambda: Option<f64>,
    pub sigma_lambda: Option<f64>,
    pub d_lambda: Option<f64>,
    /// `l(f*_lambda)`, the approximation term of the ERM rate.
    pub loss_star: f64,
}

impl Default for BoundsInput {
    fn default() -> Self {
        Self {
            chi: 1.0,
            sigma: 1.0,
            epsilon: 0.01,
            v_count: 3,
            n: 24,
            grid_size: 1,
            c0: 1.0,
            c1: 1.0,
            zeta_norm: 1.0,
            sparsity: None,
            dim: None,
            chi_lambda: None,
            sigma_lambda: None,
            d_lambda: None,
            loss_star: 0.0,
        }
    }
}

fn invalid(field: &'static str, reason: impl Into<String>) -> BoundsError {
    BoundsError::Invalid {
        field,
        reason: reason.into(),
    }
}

fn positive(field: &'static str, v: f64) -> Result<(), BoundsError> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(invalid(field, format!("must be finite and > 0, got {v}")))
    }
}

impl BoundsInput {
    pub fn validate(&self) -> Result<(), BoundsError> {
        if !(self.chi.is_finite() && self.chi >= 1.0) {
            return Err(invalid("chi", format!("must be >= 1, got {}", self.chi)));
        }
        if !(self.sigma.is_finite() && self.sigma >= 0.0) {
            return Err(invalid(
                "sigma",
                format!("must be finite and >= 0, got {}", self.sigma),
            ));
        }
        positive("epsilon", self.epsilon)?;
        for (field, v) in [
            ("v_count", self.v_count),
            ("n", self.n),
            ("grid_size", self.grid_size),
        ] {
            if v == 0 {
                return Err(invalid(field, "must be positive"));
            }
        }
        positive("c0", self.c0)?;
        positive("c1", self.c1)?;
        positive("zeta_norm", self.zeta_norm)?;
        if !(self.loss_star.is_finite() && self.loss_star >= 0.0) {
            return Err(invalid("loss_star", "must be finite and >= 0"));
        }
        for (field, v) in [
            ("chi_lambda", self.chi_lambda),
            ("sigma_lambda", self.sigma_lambda),
            ("d_lambda", self.d_lambda),
        ] {
            if let Some(v) = v {
                positive(field, v)?;
            }
        }
        if let Some(c) = self.chi_lambda {
            if c < 1.0 {
                return Err(invalid("chi_lambda", format!("must be >= 1, got {c}")));
            }
        }
        if self.sparsity == Some(0) {
            return Err(invalid("sparsity", "must be positive"));
        }
        if self.dim == Some(0) {
            return Err(invalid("dim", "must be positive"));
        }
        Ok(())
    }
}

/// The constants of the main oracle inequality.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Theorem1Constants {
    /// `8 chi^2 sqrt(2V/N) + 2 sqrt(2) eps`.
    pub a: f64,
    /// `64 V sigma^2 / (N eps)`.
    pub b: f64,
    /// `1 - |M|^2 exp(-V/48)`, clamped to `[0, 1]`.
    pub prob: f64,
    /// `a >= 1`: the inequality carries no information.
    pub vacuous: bool,
}

pub fn theorem1_constants(input: &BoundsInput) -> Result<Theorem1Constants, BoundsError> {
    input.validate()?;
    let v = input.v_count as f64;
    let n = input.n as f64;
    let m = input.grid_size as f64;
    let a = 8.0 * input.chi * input.chi * (2.0 * v / n).sqrt() + 2.0 * 2f64.sqrt() * input.epsilon;
    let b = 64.0 * v * input.sigma * input.sigma / (n * input.epsilon);
    let prob = (1.0 - m * m * (-v / 48.0).exp()).clamp(0.0, 1.0);
    Ok(Theorem1Constants {
        a,
        b,
        prob,
        vacuous: a >= 1.0,
    })
}

/// A value plus the preconditions it was evaluated outside of.
#[derive(Debug, Clone, PartialEq)]
pub struct Rate {
    pub value: f64,
    pub warnings: Vec<String>,
}

/// LASSO oracle rate `c1 ||zeta||^2 s log(e d / s) / |B|`.
pub fn lasso_rate(input: &BoundsInput, block_size: usize) -> Result<Rate, BoundsError> {
    input.validate()?;
    let s = input.sparsity.ok_or(BoundsError::Missing("sparsity"))?;
    let d = input.dim.ok_or(BoundsError::Missing("dim"))?;
    if d < s {
        return Err(invalid("dim", format!("must be >= sparsity {s}, got {d}")));
    }
    if block_size == 0 {
        return Err(invalid("block_size", "must be positive"));
    }
    let s = s as f64;
    let complexity = s * (std::f64::consts::E * d as f64 / s).ln();
    let mut warnings = Vec::new();
    if (block_size as f64) < complexity {
        warnings.push(format!(
            "block size {block_size} is below s log(ed/s) = {complexity:.4}; the LASSO rate assumes a larger block"
        ));
    }
    Ok(Rate {
        value: input.c1 * input.zeta_norm * input.zeta_norm * complexity / block_size as f64,
        warnings,
    })
}

/// `floor(N / max(4V, 2^K_min))`, the block size the ensemble guarantee
/// is stated at.
pub fn effective_block_size(n: usize, v_count: usize, k_min: u32) -> usize {
    let denom = (4 * v_count).max(1usize << k_min);
    n / denom
}

/// `(1 + 3a) min_l rho(l, floor(N/max(4V, 2^K_min))) + 2b`, where `rho(l, m)`
/// is the rate of learner `l` at block size `m` for `l < learners`.
pub fn corollary2_rhs<F>(
    input: &BoundsInput,
    k_min: u32,
    learners: usize,
    rho: F,
) -> Result<f64, BoundsError>
where
    F: Fn(usize, usize) -> f64,
{
    let c = theorem1_constants(input)?;
    if learners == 0 {
        return Err(invalid("learners", "must be positive"));
    }
    if k_min > 63 {
        return Err(invalid("k_min", format!("too large: {k_min}")));
    }
    let size = effective_block_size(input.n, input.v_count, k_min);
    if size == 0 {
        return Err(invalid("n", "effective block size is zero"));
    }
    let best = (0..learners)
        .map(|l| rho(l, size))
        .fold(f64::INFINITY, f64::min);
    Ok((1.0 + 3.0 * c.a) * best + 2.0 * c.b)
}

/// ERM aggregation rate
/// `l(f*) + 2 e^{1/48} 256^2 chi_l^12 sigma_l^2 d_l / |B|`.
pub fn erm_rate(input: &BoundsInput, block_size: usize) -> Result<Rate, BoundsError> {
    input.validate()?;
    let chi = input.chi_lambda.ok_or(BoundsError::Missing("chi_lambda"))?;
    let sigma = input
        .sigma_lambda
        .ok_or(BoundsError::Missing("sigma_lambda"))?;
    let d = input.d_lambda.ok_or(BoundsError::Missing("d_lambda"))?;
    if block_size == 0 {
        return Err(invalid("block_size", "must be positive"));
    }
    let mut warnings = Vec::new();
    let needed = (1600.0 * chi.powi(4)).powi(2) * d;
    if (block_size as f64) < needed {
        warnings.push(format!(
            "block size {block_size} is below (1600 chi^4)^2 d = {needed}; the ERM rate assumes a larger block"
        ));
    }
    let term = 2.0 * (1.0f64 / 48.0).exp() * 65536.0 * chi.powi(12) * sigma * sigma * d
        / block_size as f64;
    Ok(Rate {
        value: input.loss_star + term,
        warnings,
    })
}
