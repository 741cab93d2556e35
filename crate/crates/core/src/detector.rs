//! Batch detector.
//!
//! Each pass standardizes every column against the rows not yet flagged,
//! scores rows by their largest per-coordinate rate value, min-max normalizes
//! the scores, lowers the threshold to the configured sample quantile when
//! that is smaller, and flags rows strictly above the threshold.

use std::cmp::Ordering;

use rayon::prelude::*;

use crate::error::{LadError, Result};
use crate::matrix::DataMatrix;
use crate::rate::{scaled_rate, RateFunction};

/// Row-parallel work kicks in above this many matrix cells.
const PAR_CELLS: usize = 1 << 16;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LadConfig {
    /// Starting threshold on normalized scores.
    pub initial_threshold: f64,
    /// Sample quantile used to tighten the threshold each pass.
    pub quantile_level: f64,
    pub n_iter: usize,
    /// Floor on the subset standard deviation.
    pub epsilon: f64,
    /// A pass that would leave fewer unflagged rows than this fraction is discarded.
    pub min_unflagged_fraction: f64,
}

impl Default for LadConfig {
    fn default() -> Self {
        LadConfig {
            initial_threshold: 0.95,
            quantile_level: 0.95,
            n_iter: 5,
            epsilon: 1e-12,
            min_unflagged_fraction: 0.05,
        }
    }
}

impl LadConfig {
    pub fn validate(&self) -> Result<()> {
        let open_unit = |name: &str, v: f64| {
            if v > 0.0 && v < 1.0 {
                Ok(())
            } else {
                Err(LadError::config(format!(
                    "{name} must lie in (0, 1), got {v}"
                )))
            }
        };
        open_unit("initial-threshold", self.initial_threshold)?;
        open_unit("quantile-level", self.quantile_level)?;
        open_unit("min-unflagged-fraction", self.min_unflagged_fraction)?;
        if self.n_iter == 0 {
            return Err(LadError::config("n-iter must be at least 1"));
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(LadError::config(format!(
                "epsilon must be a small positive number, got {}",
                self.epsilon
            )));
        }
        Ok(())
    }
}

/// Outcome of the iterative scoring loop.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreState {
    /// Min-max normalized scores in `[0, 1]`.
    pub scores: Vec<f64>,
    pub flags: Vec<bool>,
    pub threshold: f64,
    pub iterations_run: usize,
    /// Threshold before the first pass followed by the threshold after each
    /// committed pass. Non-increasing.
    pub threshold_history: Vec<f64>,
}

impl ScoreState {
    pub fn flagged_count(&self) -> usize {
        self.flags.iter().filter(|&&f| f).count()
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }
}

/// Per-column mean and divisor over the rows where `subset` is set.
fn subset_stats(data: &DataMatrix, subset: &[bool], epsilon: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    let cols = data.cols();
    let rows = || {
        data.values()
            .chunks_exact(cols)
            .zip(subset)
            .filter_map(|(row, &keep)| keep.then_some(row))
    };
    let mut count = 0usize;
    let mut means = vec![0.0; cols];
    for row in rows() {
        count += 1;
        for (m, &x) in means.iter_mut().zip(row) {
            *m += x;
        }
    }
    if count == 0 {
        return Err(LadError::State(
            "every row is flagged; the reference subset is empty".into(),
        ));
    }
    for m in &mut means {
        *m /= count as f64;
    }
    let mut sq = vec![0.0; cols];
    for row in rows() {
        for ((s, &x), &m) in sq.iter_mut().zip(row).zip(&means) {
            let dev = x - m;
            *s += dev * dev;
        }
    }
    let scales: Vec<f64> = sq
        .into_iter()
        .map(|s| {
            // single-row subsets have no spread; fall back to epsilon
            let sd = if count > 1 {
                (s / (count - 1) as f64).sqrt()
            } else {
                0.0
            };
            sd.max(epsilon)
        })
        .collect();
    if let Some(c) = (0..cols).find(|&c| !means[c].is_finite() || !scales[c].is_finite()) {
        return Err(LadError::domain(format!(
            "column {c} statistics overflow; rescale the input"
        )));
    }
    Ok((means, scales))
}

/// Reference subset: active rows that are not flagged.
fn reference_subset(flags: &[bool], active: Option<&[bool]>) -> Vec<bool> {
    match active {
        Some(a) => flags.iter().zip(a).map(|(&f, &a)| a && !f).collect(),
        None => flags.iter().map(|&f| !f).collect(),
    }
}

/// Standardizes every column as `(x - mean) / max(sd, epsilon)`, with mean and
/// sample standard deviation taken over the unflagged rows only. All rows are
/// transformed. The result is row-major with the shape of `data`.
pub fn standardize(data: &DataMatrix, flags: &[bool], epsilon: f64) -> Result<Vec<f64>> {
    check_flags(data, flags)?;
    let (means, scales) = subset_stats(data, &reference_subset(flags, None), epsilon)?;
    let mut out = data.values().to_vec();
    let standardize_row = |row: &mut [f64]| {
        for ((x, &m), &s) in row.iter_mut().zip(&means).zip(&scales) {
            *x = (*x - m) / s;
        }
    };
    if out.len() >= PAR_CELLS {
        out.par_chunks_mut(data.cols()).for_each(standardize_row);
    } else {
        out.chunks_mut(data.cols()).for_each(standardize_row);
    }
    Ok(out)
}

fn check_flags(data: &DataMatrix, flags: &[bool]) -> Result<()> {
    if flags.len() != data.rows() {
        return Err(LadError::domain(format!(
            "{} flags for {} rows",
            flags.len(),
            data.rows()
        )));
    }
    Ok(())
}

/// Min-max normalizes in place over the rows selected by `active`; the rest
/// are set to zero. A constant score vector normalizes to all zeros.
fn min_max_normalize(scores: &mut [f64], active: Option<&[bool]>) {
    let (lo, hi) = match active {
        Some(a) => scores
            .iter()
            .zip(a)
            .filter(|(_, &a)| a)
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), (&s, _)| {
                (lo.min(s), hi.max(s))
            }),
        None => scores
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &s| {
                (lo.min(s), hi.max(s))
            }),
    };
    let span = hi - lo;
    // no active rows leaves span at -inf
    if span <= 0.0 {
        scores.fill(0.0);
        return;
    }
    match active {
        Some(a) => {
            for (s, &a) in scores.iter_mut().zip(a) {
                *s = if a { (*s - lo) / span } else { 0.0 };
            }
        }
        None => {
            for s in scores.iter_mut() {
                *s = (*s - lo) / span;
            }
        }
    }
}

/// One scoring pass restricted to `active` rows (all rows when `None`).
///
/// Standardization and scoring are fused per row; the arithmetic matches
/// scoring the output of [`standardize`] with [`crate::rate::raw_score`].
pub(crate) fn score_pass_masked(
    data: &DataMatrix,
    flags: &[bool],
    active: Option<&[bool]>,
    cfg: &LadConfig,
) -> Result<Vec<f64>> {
    let (means, scales) = subset_stats(data, &reference_subset(flags, active), cfg.epsilon)?;
    let n_active = active.map_or(data.rows(), |a| a.iter().filter(|&&a| a).count());
    let rf = RateFunction::GaussianStandard;
    let n = n_active as f64;
    let score_row = |row: &[f64]| {
        row.iter()
            .zip(&means)
            .zip(&scales)
            .fold(0.0, |acc: f64, ((&x, &m), &s)| {
                acc.max(scaled_rate(rf, (x - m) / s, n))
            })
            .min(f64::MAX)
    };
    let cols = data.cols();
    let mut scores: Vec<f64> = if data.values().len() >= PAR_CELLS {
        data.values().par_chunks(cols).map(score_row).collect()
    } else {
        data.values().chunks_exact(cols).map(score_row).collect()
    };
    if let Some(a) = active {
        for (s, &a) in scores.iter_mut().zip(a) {
            if !a {
                *s = 0.0;
            }
        }
    }
    min_max_normalize(&mut scores, active);
    Ok(scores)
}

/// Standardizes against the unflagged rows, scores each row by its largest
/// per-coordinate rate value with divisor `N`, and min-max normalizes.
pub fn score_pass(data: &DataMatrix, flags: &[bool], cfg: &LadConfig) -> Result<Vec<f64>> {
    check_flags(data, flags)?;
    score_pass_masked(data, flags, None, cfg)
}

/// Linear-interpolation sample quantile: position `h = (m - 1) q` in the
/// sorted values, interpolated between its floor and ceiling neighbours.
pub fn quantile(values: &[f64], q: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(LadError::domain("quantile of an empty vector"));
    }
    if !(0.0..=1.0).contains(&q) {
        return Err(LadError::domain(format!(
            "quantile level {q} outside [0, 1]"
        )));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(LadError::domain(
            "quantile input contains non-finite values",
        ));
    }
    Ok(interpolated_quantile(values, q))
}

fn interpolated_quantile(values: &[f64], q: f64) -> f64 {
    let h = (values.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    if h == lo as f64 {
        return order_statistics(values, lo).0;
    }
    let (lo_val, hi_val) = order_statistics(values, lo);
    lo_val + (h - lo as f64) * (hi_val - lo_val)
}

/// The `k`-th and `k+1`-th smallest values (the latter clamped to the
/// maximum). Values must be finite.
///
/// Large inputs are bracketed with a strided sample so that only the values
/// between two sample order statistics are copied and selected; an unlucky
/// bracket falls back to selecting over a full copy.
fn order_statistics(values: &[f64], k: usize) -> (f64, f64) {
    const SAMPLE: usize = 256;
    let m = values.len();
    if m > 2 * SAMPLE {
        let stride = m / SAMPLE;
        let mut sample: Vec<f64> = values.iter().step_by(stride).copied().collect();
        sample.sort_unstable_by(f64::total_cmp);
        let s = sample.len();
        let centre = (k as f64 + 0.5) / m as f64 * s as f64;
        let margin = 3.0 * (s as f64).sqrt();
        let lo_idx = (centre - margin).floor();
        let hi_idx = (centre + margin).ceil();
        let lo = if lo_idx < 1.0 {
            f64::NEG_INFINITY
        } else {
            sample[lo_idx as usize]
        };
        let hi = if hi_idx as usize >= s - 1 {
            f64::INFINITY
        } else {
            sample[hi_idx as usize]
        };
        let mut below = 0;
        let mut band = Vec::with_capacity(8 * m / s + 16);
        for &v in values {
            if v < lo {
                below += 1;
            } else if v <= hi {
                band.push(v);
            }
        }
        // the band holds global ranks below..below + band.len()
        if below <= k && k + 1 < below + band.len() {
            return select_pair(&mut band, k - below);
        }
    }
    select_pair(&mut values.to_vec(), k)
}

fn select_pair(values: &mut [f64], k: usize) -> (f64, f64) {
    let (_, kth, upper) = values.select_nth_unstable_by(k, f64::total_cmp);
    let kth = *kth;
    (kth, upper.iter().copied().reduce(f64::min).unwrap_or(kth))
}

/// The scoring loop shared by batch fitting and each temporal step.
///
/// `active` rows take part; inactive rows are never in the reference subset,
/// score zero and are never flagged. `seed` flags select the first reference
/// subset and are re-evaluated by the first pass.
pub(crate) fn iterate(
    data: &DataMatrix,
    active: Option<&[bool]>,
    seed: Option<&[bool]>,
    initial_threshold: f64,
    cfg: &LadConfig,
) -> Result<ScoreState> {
    let rows = data.rows();
    let n_active = active.map_or(rows, |a| a.iter().filter(|&&a| a).count());

    let mut flags: Vec<bool> = match (seed, active) {
        (Some(s), Some(a)) => s.iter().zip(a).map(|(&s, &a)| s && a).collect(),
        (Some(s), None) => s.to_vec(),
        (None, _) => vec![false; rows],
    };
    let mut state = ScoreState {
        scores: vec![0.0; rows],
        flags: vec![false; rows],
        threshold: initial_threshold,
        iterations_run: 0,
        threshold_history: vec![initial_threshold],
    };
    if n_active < 2 {
        return Ok(state);
    }

    let min_unflagged = cfg.min_unflagged_fraction * n_active as f64;
    let mut threshold = initial_threshold;
    let mut next_flags = vec![false; rows];
    for pass in 0..cfg.n_iter {
        let scores = score_pass_masked(data, &flags, active, cfg)?;
        let q = match active {
            Some(a) => {
                let kept: Vec<f64> = scores
                    .iter()
                    .zip(a)
                    .filter(|(_, &a)| a)
                    .map(|(&s, _)| s)
                    .collect();
                interpolated_quantile(&kept, cfg.quantile_level)
            }
            None => interpolated_quantile(&scores, cfg.quantile_level),
        };
        let next_threshold = threshold.min(q);
        // inactive rows score zero and zero never exceeds a threshold >= 0
        let mut flagged = 0;
        let mut changed = false;
        for ((next, &s), &prev) in next_flags.iter_mut().zip(&scores).zip(&flags) {
            *next = s > next_threshold;
            flagged += usize::from(*next);
            changed |= *next != prev;
        }
        if ((n_active - flagged) as f64) < min_unflagged {
            if pass == 0 {
                state.scores = scores;
            }
            break;
        }
        threshold = next_threshold;
        std::mem::swap(&mut flags, &mut next_flags);
        state.scores = scores;
        state.flags.clone_from(&flags);
        state.threshold = threshold;
        state.iterations_run += 1;
        state.threshold_history.push(threshold);
        if !changed {
            break;
        }
    }
    Ok(state)
}

/// Runs the full iterative detector on `data`.
pub fn fit(data: &DataMatrix, cfg: &LadConfig) -> Result<ScoreState> {
    cfg.validate()?;
    if data.rows() < 2 {
        return Err(LadError::domain(format!(
            "need at least 2 rows to fit, got {}",
            data.rows()
        )));
    }
    iterate(data, None, None, cfg.initial_threshold, cfg)
}

/// Indices of the `k` largest scores, highest first; ties go to the lower index.
pub fn rank_scores(scores: &[f64], k: usize) -> Result<Vec<usize>> {
    if k > scores.len() {
        return Err(LadError::domain(format!(
            "cannot rank top {k} of {} scores",
            scores.len()
        )));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| match scores[b].total_cmp(&scores[a]) {
        Ordering::Equal => a.cmp(&b),
        o => o,
    });
    order.truncate(k);
    Ok(order)
}

pub fn rank(state: &ScoreState, k: usize) -> Result<Vec<usize>> {
    rank_scores(&state.scores, k)
}
