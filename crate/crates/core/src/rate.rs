//! Rate-function kernel.
//!
//! An observation `x` that shifts a sample mean of `n` points by roughly
//! `x / n` has large-deviations cost `n * I(x / n)`. For standardized Gaussian
//! data `I(p) = p^2 / 2`, so the cost of a z-score `z` is `z^2 / (2n)`. A
//! multivariate observation takes the supremum of that cost over its
//! coordinate projections.

use crate::error::{LadError, Result};

/// Rate function of a sample mean.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[non_exhaustive]
pub enum RateFunction {
    /// `I(p) = p^2 / 2`, the rate function of a standard Gaussian mean.
    #[default]
    GaussianStandard,
}

impl RateFunction {
    /// Evaluates the rate function at `p`.
    pub fn eval(self, p: f64) -> Result<f64> {
        if !p.is_finite() {
            return Err(LadError::domain(format!("rate function undefined at {p}")));
        }
        Ok(self.eval_unchecked(p))
    }

    #[inline]
    pub(crate) fn eval_unchecked(self, p: f64) -> f64 {
        match self {
            RateFunction::GaussianStandard => p * p / 2.0,
        }
    }
}

pub fn rate_eval(rf: RateFunction, p: f64) -> Result<f64> {
    rf.eval(p)
}

/// Per-dimension rate values of one observation and their supremum.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectiveScore {
    pub per_dimension: Vec<f64>,
    pub combined: f64,
    pub scale_n: usize,
}

/// Scores a standardized observation against a sample of size `n`.
pub fn raw_score(z: &[f64], n: usize) -> Result<ProjectiveScore> {
    raw_score_with(RateFunction::GaussianStandard, z, n)
}

pub fn raw_score_with(rf: RateFunction, z: &[f64], n: usize) -> Result<ProjectiveScore> {
    if z.is_empty() {
        return Err(LadError::domain("cannot score an empty observation"));
    }
    if n == 0 {
        return Err(LadError::domain("sample size must be at least 1"));
    }
    if let Some(i) = z.iter().position(|v| !v.is_finite()) {
        return Err(LadError::domain(format!(
            "non-finite coordinate at index {i}"
        )));
    }
    let per_dimension: Vec<f64> = z.iter().map(|&v| scaled_rate(rf, v, n as f64)).collect();
    let combined = per_dimension.iter().copied().fold(0.0, f64::max);
    Ok(ProjectiveScore {
        per_dimension,
        combined,
        scale_n: n,
    })
}

/// `n * I(z / n)` rewritten as `I(z) / n`; exact for the Gaussian kind.
#[inline]
pub(crate) fn scaled_rate(rf: RateFunction, z: f64, n: f64) -> f64 {
    rf.eval_unchecked(z) / n
}
