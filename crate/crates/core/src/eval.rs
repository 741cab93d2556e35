//! ROC analysis and top-k labelling against ground truth.

use std::cmp::Ordering;
use std::fs;
use std::path::Path;

use crate::detector::rank_scores;
use crate::error::{LadError, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct RocCurve {
    /// `(fpr, tpr)` from `(0, 0)` to `(1, 1)`, one point per distinct score.
    pub points: Vec<(f64, f64)>,
    /// Trapezoidal area under `points`.
    pub auc: f64,
}

fn class_counts(scores: &[f64], truth: &[bool]) -> Result<(u64, u64)> {
    if scores.len() != truth.len() {
        return Err(LadError::format(format!(
            "{} scores but {} truth labels",
            scores.len(),
            truth.len()
        )));
    }
    if let Some(i) = scores.iter().position(|s| !s.is_finite()) {
        return Err(LadError::domain(format!("score {i} is not finite")));
    }
    let pos = truth.iter().filter(|&&t| t).count() as u64;
    let neg = truth.len() as u64 - pos;
    if pos == 0 || neg == 0 {
        return Err(LadError::domain(
            "ROC analysis needs at least one positive and one negative label",
        ));
    }
    Ok((pos, neg))
}

/// Sweeps every distinct score as a threshold, highest first. Tied scores
/// move together, which gives them half credit in the area.
pub fn roc_auc(scores: &[f64], truth: &[bool]) -> Result<RocCurve> {
    let (pos, neg) = class_counts(scores, truth)?;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));

    let mut points = vec![(0.0, 0.0)];
    // twice the area in units of one positive-negative pair
    let mut doubled_area: u128 = 0;
    let (mut tp, mut fp) = (0u64, 0u64);
    let mut i = 0;
    while i < order.len() {
        let (prev_tp, prev_fp) = (tp, fp);
        let current = scores[order[i]];
        while i < order.len() && scores[order[i]].total_cmp(&current) == Ordering::Equal {
            if truth[order[i]] {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        doubled_area += u128::from(fp - prev_fp) * u128::from(tp + prev_tp);
        points.push((fp as f64 / neg as f64, tp as f64 / pos as f64));
    }
    let auc = doubled_area as f64 / (2.0 * pos as f64 * neg as f64);
    debug_assert!((auc - rank_auc(scores, truth).unwrap_or(auc)).abs() < 1e-9);
    Ok(RocCurve { points, auc })
}

/// Mann-Whitney form: the chance a random positive outscores a random
/// negative, ties counting one half. Uses mid-ranks.
pub fn rank_auc(scores: &[f64], truth: &[bool]) -> Result<f64> {
    let (pos, neg) = class_counts(scores, truth)?;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    // sum of doubled mid-ranks of the positives keeps everything integral
    let mut doubled_rank_sum: u128 = 0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j < order.len() && scores[order[j]].total_cmp(&scores[order[i]]) == Ordering::Equal {
            j += 1;
        }
        // ranks i+1 ..= j share the mid-rank (i + 1 + j) / 2
        let doubled_mid = (i + 1 + j) as u128;
        let positives = order[i..j].iter().filter(|&&k| truth[k]).count() as u128;
        doubled_rank_sum += doubled_mid * positives;
        i = j;
    }
    let pos128 = u128::from(pos);
    let doubled_u = doubled_rank_sum - pos128 * (pos128 + 1);
    Ok(doubled_u as f64 / (2.0 * pos as f64 * neg as f64))
}

/// Flags exactly the `k` highest-scoring rows.
pub fn top_k_labels(scores: &[f64], k: usize) -> Result<Vec<bool>> {
    if k == 0 || k > scores.len() {
        return Err(LadError::domain(format!(
            "k must lie in 1..={}, got {k}",
            scores.len()
        )));
    }
    let mut flags = vec![false; scores.len()];
    for i in rank_scores(scores, k)? {
        flags[i] = true;
    }
    Ok(flags)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Confusion {
    pub true_positive: usize,
    pub false_positive: usize,
    pub false_negative: usize,
    pub true_negative: usize,
}

impl Confusion {
    pub fn from_labels(predicted: &[bool], truth: &[bool]) -> Self {
        let mut c = Confusion::default();
        for (&p, &t) in predicted.iter().zip(truth) {
            match (p, t) {
                (true, true) => c.true_positive += 1,
                (true, false) => c.false_positive += 1,
                (false, true) => c.false_negative += 1,
                (false, false) => c.true_negative += 1,
            }
        }
        c
    }
}

/// Confusion counts of [`top_k_labels`] with `k` equal to the number of true anomalies.
pub fn top_k_confusion(scores: &[f64], truth: &[bool]) -> Result<Confusion> {
    class_counts(scores, truth)?;
    let k = truth.iter().filter(|&&t| t).count();
    Ok(Confusion::from_labels(&top_k_labels(scores, k)?, truth))
}

/// Reads a headerless single-column score file. Blank lines and lines
/// starting with `#` are skipped.
pub fn read_score_file(path: &Path) -> Result<Vec<f64>> {
    let text = fs::read_to_string(path).map_err(|source| LadError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_score_text(&text)
}

pub fn parse_score_text(text: &str) -> Result<Vec<f64>> {
    let mut scores = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let value: f64 = line.parse().map_err(|_| {
            LadError::format(format!(
                "line {}: `{line}` is not a decimal score",
                lineno + 1
            ))
        })?;
        if !value.is_finite() {
            return Err(LadError::format(format!(
                "line {}: score is not finite",
                lineno + 1
            )));
        }
        scores.push(value);
    }
    Ok(scores)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComparisonReport {
    pub ours_auc: f64,
    pub external_auc: f64,
    /// `ours_auc - external_auc`
    pub difference: f64,
}

pub fn compare_scores(
    ours: &RocCurve,
    external: &[f64],
    truth: &[bool],
) -> Result<ComparisonReport> {
    if external.len() != truth.len() {
        return Err(LadError::format(format!(
            "external score file has {} rows, expected {}",
            external.len(),
            truth.len()
        )));
    }
    let external_auc = roc_auc(external, truth)?.auc;
    Ok(ComparisonReport {
        ours_auc: ours.auc,
        external_auc,
        difference: ours.auc - external_auc,
    })
}

/// Compares our ROC against scores produced by another detector.
pub fn score_file_compare(
    ours: &RocCurve,
    external: &Path,
    truth: &[bool],
) -> Result<ComparisonReport> {
    compare_scores(ours, &read_score_file(external)?, truth)
}
