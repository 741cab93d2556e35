//! Online detection over a panel of multivariate time series.
//!
//! At each time step every series contributes one row built by stacking its
//! last `w + 1` observations side by side. The batch scoring loop runs on that
//! matrix, seeded with the flags from the previous step, so a series flagged
//! at `t - 1` starts outside the reference subset at `t` and is re-evaluated.

use crate::detector::{iterate, LadConfig, ScoreState};
use crate::error::{LadError, Result};
use crate::matrix::DataMatrix;

/// N series of length T with d features each, stored `[series][time][feature]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeriesPanel {
    series_count: usize,
    length: usize,
    feature_count: usize,
    values: Vec<f64>,
    start_offsets: Vec<usize>,
    series_ids: Vec<String>,
    time_labels: Vec<String>,
    normalizers: Option<Vec<f64>>,
}

impl TimeSeriesPanel {
    pub fn new(
        series_count: usize,
        length: usize,
        feature_count: usize,
        values: Vec<f64>,
    ) -> Result<Self> {
        if series_count == 0 || length == 0 || feature_count == 0 {
            return Err(LadError::domain(format!(
                "panel must be non-empty, got {series_count}x{length}x{feature_count}"
            )));
        }
        if values.len() != series_count * length * feature_count {
            return Err(LadError::domain(format!(
                "expected {} panel values, got {}",
                series_count * length * feature_count,
                values.len()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            let per_series = length * feature_count;
            return Err(LadError::domain(format!(
                "non-finite value in series {} at t={}",
                pos / per_series,
                (pos % per_series) / feature_count
            )));
        }
        Ok(TimeSeriesPanel {
            series_count,
            length,
            feature_count,
            values,
            start_offsets: vec![0; series_count],
            series_ids: (0..series_count).map(|i| i.to_string()).collect(),
            time_labels: (0..length).map(|t| t.to_string()).collect(),
            normalizers: None,
        })
    }

    pub fn with_series_ids(mut self, ids: Vec<String>) -> Result<Self> {
        if ids.len() != self.series_count {
            return Err(LadError::domain(format!(
                "{} ids for {} series",
                ids.len(),
                self.series_count
            )));
        }
        self.series_ids = ids;
        Ok(self)
    }

    pub fn with_time_labels(mut self, labels: Vec<String>) -> Result<Self> {
        if labels.len() != self.length {
            return Err(LadError::domain(format!(
                "{} time labels for length {}",
                labels.len(),
                self.length
            )));
        }
        self.time_labels = labels;
        Ok(self)
    }

    pub fn with_start_offsets(mut self, offsets: Vec<usize>) -> Result<Self> {
        if offsets.len() != self.series_count {
            return Err(LadError::domain(format!(
                "{} start offsets for {} series",
                offsets.len(),
                self.series_count
            )));
        }
        if let Some(n) = offsets.iter().position(|&o| o >= self.length) {
            return Err(LadError::domain(format!(
                "start offset {} of series {n} is not below the panel length {}",
                offsets[n], self.length
            )));
        }
        self.start_offsets = offsets;
        Ok(self)
    }

    /// Attaches per-series normalizers such as populations.
    pub fn with_normalizers(mut self, normalizers: Vec<f64>) -> Result<Self> {
        if normalizers.len() != self.series_count {
            return Err(LadError::domain(format!(
                "{} normalizers for {} series",
                normalizers.len(),
                self.series_count
            )));
        }
        self.normalizers = Some(normalizers);
        Ok(self)
    }

    pub fn series_count(&self) -> usize {
        self.series_count
    }

    pub fn length(&self) -> usize {
        self.length
    }

    pub fn feature_count(&self) -> usize {
        self.feature_count
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn start_offsets(&self) -> &[usize] {
        &self.start_offsets
    }

    pub fn series_ids(&self) -> &[String] {
        &self.series_ids
    }

    pub fn time_labels(&self) -> &[String] {
        &self.time_labels
    }

    pub fn normalizers(&self) -> Option<&[f64]> {
        self.normalizers.as_deref()
    }

    pub fn value(&self, series: usize, t: usize, feature: usize) -> f64 {
        self.values[self.index(series, t, feature)]
    }

    /// Feature vector of `series` at time `t`.
    pub fn observation(&self, series: usize, t: usize) -> &[f64] {
        let start = self.index(series, t, 0);
        &self.values[start..start + self.feature_count]
    }

    fn index(&self, series: usize, t: usize, feature: usize) -> usize {
        (series * self.length + t) * self.feature_count + feature
    }

    /// Steps during which `series` exists.
    pub fn effective_length(&self, series: usize) -> usize {
        self.length - self.start_offsets[series]
    }

    /// Same shape and metadata with new values.
    pub(crate) fn with_values(&self, values: Vec<f64>) -> Result<Self> {
        let mut out = Self::new(self.series_count, self.length, self.feature_count, values)?;
        out.start_offsets.clone_from(&self.start_offsets);
        out.series_ids.clone_from(&self.series_ids);
        out.time_labels.clone_from(&self.time_labels);
        out.normalizers.clone_from(&self.normalizers);
        Ok(out)
    }

    /// Keeps the listed series in the given order.
    pub fn select_series(&self, keep: &[usize]) -> Result<Self> {
        if keep.is_empty() {
            return Err(LadError::domain("cannot select zero series"));
        }
        let per_series = self.length * self.feature_count;
        let mut values = Vec::with_capacity(keep.len() * per_series);
        for &n in keep {
            if n >= self.series_count {
                return Err(LadError::domain(format!("no series {n}")));
            }
            values.extend_from_slice(&self.values[n * per_series..(n + 1) * per_series]);
        }
        let mut out = Self::new(keep.len(), self.length, self.feature_count, values)?;
        out.start_offsets = keep.iter().map(|&n| self.start_offsets[n]).collect();
        out.series_ids = keep.iter().map(|&n| self.series_ids[n].clone()).collect();
        out.time_labels.clone_from(&self.time_labels);
        out.normalizers = self
            .normalizers
            .as_ref()
            .map(|p| keep.iter().map(|&n| p[n]).collect());
        Ok(out)
    }
}

/// Horizontally stacked window at one time step.
#[derive(Debug, Clone, PartialEq)]
pub struct StackedWindow {
    /// `N x d(w+1)`; columns run oldest step first.
    pub matrix: DataMatrix,
    /// `false` for series that have not started yet.
    pub active: Vec<bool>,
}

/// Stacks steps `t - w ..= t` of every series into one row each. Steps before
/// time zero or before a series' start are zero-filled.
pub fn stack_window(panel: &TimeSeriesPanel, t: usize, w: usize) -> Result<StackedWindow> {
    if t >= panel.length {
        return Err(LadError::domain(format!(
            "time index {t} outside panel of length {}",
            panel.length
        )));
    }
    let d = panel.feature_count;
    let width = d * (w + 1);
    let mut values = vec![0.0; panel.series_count * width];
    let mut active = Vec::with_capacity(panel.series_count);
    for (n, row) in values.chunks_mut(width).enumerate() {
        let start = panel.start_offsets[n];
        active.push(start <= t);
        for (k, slot) in row.chunks_mut(d).enumerate() {
            // slot k holds step t - w + k
            let Some(step) = (t + k).checked_sub(w) else {
                continue;
            };
            if step >= start {
                slot.copy_from_slice(panel.observation(n, step));
            }
        }
    }
    let matrix = DataMatrix::from_row_major(panel.series_count, width, values)?;
    Ok(StackedWindow { matrix, active })
}

/// Threshold policy between consecutive time steps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ThresholdCarry {
    /// Every step starts from the configured initial threshold.
    #[default]
    Reset,
    /// Every step starts from the previous step's final threshold.
    Carry,
}

/// Window length policy for a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Window {
    /// Current step plus `w` preceding steps.
    Fixed(usize),
    /// All steps from 0 through the current one.
    FullHistory,
}

impl Window {
    fn at(self, t: usize) -> usize {
        match self {
            Window::Fixed(w) => w,
            Window::FullHistory => t,
        }
    }
}

/// Scores time step `t`, seeding flags (and, under [`ThresholdCarry::Carry`],
/// the threshold) from `prev`.
pub fn step(
    panel: &TimeSeriesPanel,
    t: usize,
    prev: Option<&ScoreState>,
    cfg: &LadConfig,
    w: usize,
    carry: ThresholdCarry,
) -> Result<ScoreState> {
    cfg.validate()?;
    if let Some(p) = prev {
        if p.flags.len() != panel.series_count {
            return Err(LadError::domain(format!(
                "previous state covers {} series, panel has {}",
                p.flags.len(),
                panel.series_count
            )));
        }
    }
    let window = stack_window(panel, t, w)?;
    let threshold = match (carry, prev) {
        (ThresholdCarry::Carry, Some(p)) => p.threshold,
        _ => cfg.initial_threshold,
    };
    let all_active = window.active.iter().all(|&a| a);
    let active = (!all_active).then_some(window.active.as_slice());
    iterate(
        &window.matrix,
        active,
        prev.map(|p| p.flags.as_slice()),
        threshold,
        cfg,
    )
}

/// Scores and flags for every series at every step, plus per-series aggregates.
#[derive(Debug, Clone, PartialEq)]
pub struct TemporalScores {
    series_count: usize,
    length: usize,
    /// `[series][time]`
    pub scores: Vec<f64>,
    /// `[series][time]`
    pub flags: Vec<bool>,
    /// Share of each series' effective length spent flagged.
    pub aggregate: Vec<f64>,
    /// Final threshold of each step.
    pub thresholds: Vec<f64>,
    /// Committed passes at each step.
    pub iterations: Vec<usize>,
}

impl TemporalScores {
    pub fn series_count(&self) -> usize {
        self.series_count
    }

    pub fn length(&self) -> usize {
        self.length
    }

    pub fn score(&self, series: usize, t: usize) -> f64 {
        self.scores[series * self.length + t]
    }

    pub fn flag(&self, series: usize, t: usize) -> bool {
        self.flags[series * self.length + t]
    }

    pub fn flagged_steps(&self, series: usize) -> usize {
        self.flags[series * self.length..(series + 1) * self.length]
            .iter()
            .filter(|&&f| f)
            .count()
    }

    pub fn total_flags(&self) -> usize {
        self.flags.iter().filter(|&&f| f).count()
    }

    /// Series indices by descending aggregate; ties go to the lower index.
    pub fn ranking(&self) -> Vec<usize> {
        crate::detector::rank_scores(&self.aggregate, self.series_count)
            .expect("k equals the series count")
    }
}

/// Folds [`step`] over every time index.
pub fn run(
    panel: &TimeSeriesPanel,
    cfg: &LadConfig,
    window: Window,
    carry: ThresholdCarry,
) -> Result<TemporalScores> {
    cfg.validate()?;
    let (n_series, length) = (panel.series_count, panel.length);
    let mut scores = vec![0.0; n_series * length];
    let mut flags = vec![false; n_series * length];
    let mut thresholds = Vec::with_capacity(length);
    let mut iterations = Vec::with_capacity(length);
    let mut prev: Option<ScoreState> = None;
    for t in 0..length {
        let state = step(panel, t, prev.as_ref(), cfg, window.at(t), carry)?;
        for n in 0..n_series {
            scores[n * length + t] = state.scores[n];
            flags[n * length + t] = state.flags[n];
        }
        thresholds.push(state.threshold);
        iterations.push(state.iterations_run);
        prev = Some(state);
    }
    let aggregate = (0..n_series)
        .map(|n| {
            let flagged = flags[n * length..(n + 1) * length]
                .iter()
                .filter(|&&f| f)
                .count();
            flagged as f64 / panel.effective_length(n) as f64
        })
        .collect();
    Ok(TemporalScores {
        series_count: n_series,
        length,
        scores,
        flags,
        aggregate,
        thresholds,
        iterations,
    })
}

/// Window grows to cover the entire history at each step.
pub fn full_history_mode(panel: &TimeSeriesPanel, cfg: &LadConfig) -> Result<TemporalScores> {
    run(panel, cfg, Window::FullHistory, ThresholdCarry::Reset)
}

/// Each step sees only its own observations.
pub fn one_time_step_mode(panel: &TimeSeriesPanel, cfg: &LadConfig) -> Result<TemporalScores> {
    run(panel, cfg, Window::Fixed(0), ThresholdCarry::Reset)
}
