//! Large-deviations anomaly detection.
//!
//! Rows of a dense matrix are scored by the Gaussian large-deviations rate of
//! their standardized coordinates, taking the largest coordinate cost. The
//! batch [`detector`] iterates scoring against a shrinking reference subset;
//! [`temporal`] applies the same loop at every step of a panel of
//! multivariate time series and aggregates flags per series.

pub mod bench;
pub mod detector;
pub mod error;
pub mod eval;
pub mod ingest;
pub mod matrix;
pub mod rate;
pub mod synth;
pub mod temporal;

pub use detector::{
    fit, quantile, rank, rank_scores, score_pass, standardize, LadConfig, ScoreState,
};
pub use error::{LadError, Result};
pub use eval::{roc_auc, top_k_labels, RocCurve};
pub use matrix::DataMatrix;
pub use rate::{rate_eval, raw_score, ProjectiveScore, RateFunction};
pub use temporal::{
    full_history_mode, one_time_step_mode, run, stack_window, step, TemporalScores, ThresholdCarry,
    TimeSeriesPanel, Window,
};
