//! Timing sweeps over synthetic Gaussian data.

use std::time::Instant;

use crate::detector::{fit, LadConfig};
use crate::error::{LadError, Result};
use crate::synth::gaussian_matrix;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BenchPoint {
    pub rows: usize,
    pub cols: usize,
    /// Median wall time of one fit.
    pub seconds: f64,
}

fn time_fit(data: &crate::matrix::DataMatrix, cfg: &LadConfig, repeats: usize) -> Result<f64> {
    // warm-up run keeps allocator and cache state comparable across points
    fit(data, cfg)?;
    let mut times = Vec::with_capacity(repeats);
    for _ in 0..repeats {
        let start = Instant::now();
        std::hint::black_box(fit(std::hint::black_box(data), cfg)?);
        times.push(start.elapsed().as_secs_f64());
    }
    times.sort_by(f64::total_cmp);
    Ok(median_sorted(&times))
}

fn median_sorted(v: &[f64]) -> f64 {
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        (v[m - 1] + v[m]) / 2.0
    }
}

fn check(sweep: &[usize], repeats: usize) -> Result<()> {
    if sweep.is_empty() || sweep.contains(&0) {
        return Err(LadError::config("sweep values must be positive"));
    }
    if repeats == 0 {
        return Err(LadError::config("repeats must be at least 1"));
    }
    Ok(())
}

/// Times fits on the first `k` rows of one `max(rows) x cols` dataset.
pub fn rows_sweep(
    rows: &[usize],
    cols: usize,
    repeats: usize,
    seed: u64,
    cfg: &LadConfig,
) -> Result<Vec<BenchPoint>> {
    check(rows, repeats)?;
    check(&[cols], repeats)?;
    let full = gaussian_matrix(*rows.iter().max().unwrap_or(&1), cols, seed)?;
    rows.iter()
        .map(|&r| {
            let data = full.leading_rows(r)?;
            Ok(BenchPoint {
                rows: r,
                cols,
                seconds: time_fit(&data, cfg, repeats)?,
            })
        })
        .collect()
}

/// Times fits on the first `k` columns of one `rows x max(dims)` dataset.
pub fn dims_sweep(
    rows: usize,
    dims: &[usize],
    repeats: usize,
    seed: u64,
    cfg: &LadConfig,
) -> Result<Vec<BenchPoint>> {
    check(dims, repeats)?;
    check(&[rows], repeats)?;
    let full = gaussian_matrix(rows, *dims.iter().max().unwrap_or(&1), seed)?;
    dims.iter()
        .map(|&d| {
            let data = full.leading_columns(d)?;
            Ok(BenchPoint {
                rows,
                cols: d,
                seconds: time_fit(&data, cfg, repeats)?,
            })
        })
        .collect()
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn loglog_slope(points: &[(f64, f64)]) -> Option<f64> {
    let logs: Vec<(f64, f64)> = points
        .iter()
        .filter(|(x, y)| *x > 0.0 && *y > 0.0)
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    if logs.len() < 2 {
        return None;
    }
    let n = logs.len() as f64;
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = logs.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = logs.iter().map(|(x, _)| (x - mx).powi(2)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}
