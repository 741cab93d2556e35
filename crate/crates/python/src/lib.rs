//! Python bindings for the `lad` detector.
//!
//! Matrices cross the boundary as lists of rows and panels as nested lists
//! indexed `[series][time][feature]`.

use std::path::PathBuf;

use pyo3::create_exception;
use pyo3::exceptions::{PyOSError, PyValueError};
use pyo3::prelude::*;

use lad_core::ingest::{self, ColumnRef, MatrixOptions};
use lad_core::{DataMatrix, LadError, ThresholdCarry, TimeSeriesPanel, Window};

create_exception!(lad, StateError, pyo3::exceptions::PyRuntimeError);

fn to_py(err: LadError) -> PyErr {
    match err {
        LadError::State(msg) => StateError::new_err(msg),
        LadError::Io { .. } => PyOSError::new_err(err.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

fn matrix(rows: Vec<Vec<f64>>) -> PyResult<DataMatrix> {
    DataMatrix::from_rows(&rows).map_err(to_py)
}

fn panel(
    values: Vec<Vec<Vec<f64>>>,
    start_offsets: Option<Vec<usize>>,
) -> PyResult<TimeSeriesPanel> {
    let n = values.len();
    let t = values.first().map_or(0, Vec::len);
    let d = values.first().and_then(|s| s.first()).map_or(0, Vec::len);
    for (i, series) in values.iter().enumerate() {
        if series.len() != t || series.iter().any(|obs| obs.len() != d) {
            return Err(PyValueError::new_err(format!(
                "series {i} does not match the {t} x {d} shape of series 0"
            )));
        }
    }
    let flat = values.into_iter().flatten().flatten().collect();
    let p = TimeSeriesPanel::new(n, t, d, flat).map_err(to_py)?;
    match start_offsets {
        Some(s) => p.with_start_offsets(s).map_err(to_py),
        None => Ok(p),
    }
}

#[pyclass(
    name = "LadConfig",
    module = "lad",
    get_all,
    set_all,
    skip_from_py_object
)]
#[derive(Clone)]
struct PyLadConfig {
    initial_threshold: f64,
    quantile_level: f64,
    n_iter: usize,
    epsilon: f64,
    min_unflagged_fraction: f64,
}

#[pymethods]
impl PyLadConfig {
    #[new]
    #[pyo3(signature = (initial_threshold=0.95, quantile_level=0.95, n_iter=5, epsilon=1e-12, min_unflagged_fraction=0.05))]
    fn new(
        initial_threshold: f64,
        quantile_level: f64,
        n_iter: usize,
        epsilon: f64,
        min_unflagged_fraction: f64,
    ) -> PyResult<Self> {
        let cfg = PyLadConfig {
            initial_threshold,
            quantile_level,
            n_iter,
            epsilon,
            min_unflagged_fraction,
        };
        cfg.core().validate().map_err(to_py)?;
        Ok(cfg)
    }

    fn __repr__(&self) -> String {
        format!(
            "LadConfig(initial_threshold={}, quantile_level={}, n_iter={}, epsilon={:e}, min_unflagged_fraction={})",
            self.initial_threshold, self.quantile_level, self.n_iter, self.epsilon, self.min_unflagged_fraction
        )
    }
}

impl PyLadConfig {
    fn core(&self) -> lad_core::LadConfig {
        lad_core::LadConfig {
            initial_threshold: self.initial_threshold,
            quantile_level: self.quantile_level,
            n_iter: self.n_iter,
            epsilon: self.epsilon,
            min_unflagged_fraction: self.min_unflagged_fraction,
        }
    }
}

fn config(cfg: Option<PyRef<'_, PyLadConfig>>) -> lad_core::LadConfig {
    cfg.map(|c| c.core()).unwrap_or_default()
}

#[pyclass(name = "ScoreState", module = "lad", frozen)]
struct PyScoreState(lad_core::ScoreState);

#[pymethods]
impl PyScoreState {
    #[getter]
    fn scores(&self) -> Vec<f64> {
        self.0.scores.clone()
    }

    #[getter]
    fn flags(&self) -> Vec<bool> {
        self.0.flags.clone()
    }

    #[getter]
    fn threshold(&self) -> f64 {
        self.0.threshold
    }

    #[getter]
    fn iterations_run(&self) -> usize {
        self.0.iterations_run
    }

    #[getter]
    fn threshold_history(&self) -> Vec<f64> {
        self.0.threshold_history.clone()
    }

    fn flagged_count(&self) -> usize {
        self.0.flagged_count()
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }

    fn __repr__(&self) -> String {
        format!(
            "ScoreState(rows={}, flagged={}, threshold={}, iterations_run={})",
            self.0.len(),
            self.0.flagged_count(),
            self.0.threshold,
            self.0.iterations_run
        )
    }
}

#[pyclass(name = "TemporalScores", module = "lad", frozen)]
struct PyTemporalScores(lad_core::TemporalScores);

impl PyTemporalScores {
    fn by_series<T: Clone>(&self, flat: &[T]) -> Vec<Vec<T>> {
        flat.chunks(self.0.length()).map(<[T]>::to_vec).collect()
    }
}

#[pymethods]
impl PyTemporalScores {
    /// Scores indexed `[series][time]`.
    #[getter]
    fn scores(&self) -> Vec<Vec<f64>> {
        self.by_series(&self.0.scores)
    }

    #[getter]
    fn flags(&self) -> Vec<Vec<bool>> {
        self.by_series(&self.0.flags)
    }

    #[getter]
    fn aggregate(&self) -> Vec<f64> {
        self.0.aggregate.clone()
    }

    #[getter]
    fn thresholds(&self) -> Vec<f64> {
        self.0.thresholds.clone()
    }

    #[getter]
    fn iterations(&self) -> Vec<usize> {
        self.0.iterations.clone()
    }

    fn ranking(&self) -> Vec<usize> {
        self.0.ranking()
    }

    fn total_flags(&self) -> usize {
        self.0.total_flags()
    }

    fn __repr__(&self) -> String {
        format!(
            "TemporalScores(series={}, length={}, flags={})",
            self.0.series_count(),
            self.0.length(),
            self.0.total_flags()
        )
    }
}

#[pyclass(name = "RocCurve", module = "lad", frozen)]
struct PyRocCurve(lad_core::RocCurve);

#[pymethods]
impl PyRocCurve {
    /// `(false positive rate, true positive rate)` pairs from the origin.
    #[getter]
    fn points(&self) -> Vec<(f64, f64)> {
        self.0.points.clone()
    }

    #[getter]
    fn auc(&self) -> f64 {
        self.0.auc
    }

    fn __repr__(&self) -> String {
        format!(
            "RocCurve(points={}, auc={})",
            self.0.points.len(),
            self.0.auc
        )
    }
}

#[pyfunction]
#[pyo3(signature = (data, config=None))]
fn fit(
    py: Python<'_>,
    data: Vec<Vec<f64>>,
    config: Option<PyRef<'_, PyLadConfig>>,
) -> PyResult<PyScoreState> {
    let (m, cfg) = (matrix(data)?, self::config(config));
    let state = py.detach(|| lad_core::fit(&m, &cfg)).map_err(to_py)?;
    Ok(PyScoreState(state))
}

#[pyfunction]
#[pyo3(signature = (data, flags, config=None))]
fn score_pass(
    data: Vec<Vec<f64>>,
    flags: Vec<bool>,
    config: Option<PyRef<'_, PyLadConfig>>,
) -> PyResult<Vec<f64>> {
    lad_core::score_pass(&matrix(data)?, &flags, &self::config(config)).map_err(to_py)
}

#[pyfunction]
#[pyo3(signature = (data, flags, epsilon=1e-12))]
fn standardize(data: Vec<Vec<f64>>, flags: Vec<bool>, epsilon: f64) -> PyResult<Vec<Vec<f64>>> {
    let m = matrix(data)?;
    let z = lad_core::standardize(&m, &flags, epsilon).map_err(to_py)?;
    Ok(z.chunks(m.cols()).map(<[f64]>::to_vec).collect())
}

#[pyfunction]
fn quantile(values: Vec<f64>, q: f64) -> PyResult<f64> {
    lad_core::quantile(&values, q).map_err(to_py)
}

#[pyfunction]
fn rank(state: PyRef<'_, PyScoreState>, k: usize) -> PyResult<Vec<usize>> {
    lad_core::rank(&state.0, k).map_err(to_py)
}

/// Returns `(per_dimension, combined)`.
#[pyfunction]
fn raw_score(z: Vec<f64>, n: usize) -> PyResult<(Vec<f64>, f64)> {
    let s = lad_core::raw_score(&z, n).map_err(to_py)?;
    Ok((s.per_dimension, s.combined))
}

#[pyfunction]
fn rate_eval(p: f64) -> PyResult<f64> {
    lad_core::rate_eval(lad_core::RateFunction::GaussianStandard, p).map_err(to_py)
}

#[pyfunction]
fn roc_auc(scores: Vec<f64>, truth: Vec<bool>) -> PyResult<PyRocCurve> {
    lad_core::roc_auc(&scores, &truth)
        .map(PyRocCurve)
        .map_err(to_py)
}

#[pyfunction]
fn top_k_labels(scores: Vec<f64>, k: usize) -> PyResult<Vec<bool>> {
    lad_core::top_k_labels(&scores, k).map_err(to_py)
}

/// `window` is the number of preceding steps stacked with each step, or
/// `None` for the whole history. `threshold_carry` is `"reset"` or `"carry"`.
#[pyfunction]
#[pyo3(signature = (panel, config=None, window=Some(0), threshold_carry="reset", start_offsets=None))]
fn run(
    py: Python<'_>,
    panel: Vec<Vec<Vec<f64>>>,
    config: Option<PyRef<'_, PyLadConfig>>,
    window: Option<usize>,
    threshold_carry: &str,
    start_offsets: Option<Vec<usize>>,
) -> PyResult<PyTemporalScores> {
    let carry = match threshold_carry {
        "reset" => ThresholdCarry::Reset,
        "carry" => ThresholdCarry::Carry,
        other => {
            return Err(PyValueError::new_err(format!(
                "threshold_carry must be 'reset' or 'carry', got {other:?}"
            )))
        }
    };
    let window = window.map_or(Window::FullHistory, Window::Fixed);
    let (p, cfg) = (self::panel(panel, start_offsets)?, self::config(config));
    let out = py
        .detach(|| lad_core::run(&p, &cfg, window, carry))
        .map_err(to_py)?;
    Ok(PyTemporalScores(out))
}

#[pyfunction]
#[pyo3(signature = (panel, config=None, start_offsets=None))]
fn full_history_mode(
    panel: Vec<Vec<Vec<f64>>>,
    config: Option<PyRef<'_, PyLadConfig>>,
    start_offsets: Option<Vec<usize>>,
) -> PyResult<PyTemporalScores> {
    let p = self::panel(panel, start_offsets)?;
    lad_core::full_history_mode(&p, &self::config(config))
        .map(PyTemporalScores)
        .map_err(to_py)
}

#[pyfunction]
#[pyo3(signature = (panel, config=None, start_offsets=None))]
fn one_time_step_mode(
    panel: Vec<Vec<Vec<f64>>>,
    config: Option<PyRef<'_, PyLadConfig>>,
    start_offsets: Option<Vec<usize>>,
) -> PyResult<PyTemporalScores> {
    let p = self::panel(panel, start_offsets)?;
    lad_core::one_time_step_mode(&p, &self::config(config))
        .map(PyTemporalScores)
        .map_err(to_py)
}

type LoadedMatrix = (Vec<Vec<f64>>, Option<Vec<bool>>);

/// Reads a delimited matrix. Returns `(rows, labels)`; `labels` is `None`
/// without `label_column`.
#[pyfunction]
#[pyo3(signature = (path, label_column=None, id_column=None))]
fn load_matrix(
    path: PathBuf,
    label_column: Option<&str>,
    id_column: Option<&str>,
) -> PyResult<LoadedMatrix> {
    let opts = MatrixOptions {
        label_column: label_column.map(ColumnRef::parse),
        id_column: id_column.map(ColumnRef::parse),
        delimiter: None,
    };
    let m = ingest::load_matrix(&path, &opts).map_err(to_py)?;
    let rows = (0..m.rows()).map(|i| m.row(i).to_vec()).collect();
    Ok((rows, m.labels().map(<[bool]>::to_vec)))
}

#[pymodule]
fn lad(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("StateError", m.py().get_type::<StateError>())?;
    m.add_class::<PyLadConfig>()?;
    m.add_class::<PyScoreState>()?;
    m.add_class::<PyTemporalScores>()?;
    m.add_class::<PyRocCurve>()?;
    m.add_function(wrap_pyfunction!(fit, m)?)?;
    m.add_function(wrap_pyfunction!(score_pass, m)?)?;
    m.add_function(wrap_pyfunction!(standardize, m)?)?;
    m.add_function(wrap_pyfunction!(quantile, m)?)?;
    m.add_function(wrap_pyfunction!(rank, m)?)?;
    m.add_function(wrap_pyfunction!(raw_score, m)?)?;
    m.add_function(wrap_pyfunction!(rate_eval, m)?)?;
    m.add_function(wrap_pyfunction!(roc_auc, m)?)?;
    m.add_function(wrap_pyfunction!(top_k_labels, m)?)?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    m.add_function(wrap_pyfunction!(full_history_mode, m)?)?;
    m.add_function(wrap_pyfunction!(one_time_step_mode, m)?)?;
    m.add_function(wrap_pyfunction!(load_matrix, m)?)?;
    Ok(())
}
