//! Delimited-text loaders for benchmark matrices and long-format panels, and
//! the count preprocessing applied to epidemiological panels.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use crate::error::{LadError, Result};
use crate::matrix::DataMatrix;
use crate::temporal::TimeSeriesPanel;

/// A column addressed by header name or zero-based position.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ColumnRef {
    Name(String),
    Index(usize),
}

impl ColumnRef {
    /// Digits become an index, anything else a name.
    pub fn parse(s: &str) -> Self {
        match s.parse::<usize>() {
            Ok(i) => ColumnRef::Index(i),
            Err(_) => ColumnRef::Name(s.to_string()),
        }
    }

    fn resolve(&self, header: Option<&[String]>, width: usize) -> Result<usize> {
        let found = match self {
            ColumnRef::Name(name) => header.and_then(|h| h.iter().position(|c| c == name)),
            ColumnRef::Index(i) => {
                // a header cell spelled like the number wins
                let by_name = header.and_then(|h| h.iter().position(|c| c == &i.to_string()));
                by_name.or((*i < width).then_some(*i))
            }
        };
        found.ok_or_else(|| LadError::format(format!("unknown column {self}")))
    }
}

impl std::fmt::Display for ColumnRef {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ColumnRef::Name(n) => write!(f, "`{n}`"),
            ColumnRef::Index(i) => write!(f, "#{i}"),
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct MatrixOptions {
    pub label_column: Option<ColumnRef>,
    pub id_column: Option<ColumnRef>,
    /// Auto-detected among comma, tab and semicolon when unset.
    pub delimiter: Option<u8>,
}

fn io_err(path: &Path, source: std::io::Error) -> LadError {
    LadError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Picks whichever of comma, tab and semicolon appears most in the first line.
pub fn detect_delimiter(path: &Path) -> Result<u8> {
    let file = File::open(path).map_err(|e| io_err(path, e))?;
    let mut first = String::new();
    BufReader::new(file)
        .read_line(&mut first)
        .map_err(|e| io_err(path, e))?;
    let count = |c: char| first.matches(c).count();
    let best = (*b",\t;")
        .into_iter()
        .max_by_key(|&d| (count(d as char), d == b','))
        .unwrap_or(b',');
    Ok(best)
}

fn read_records(path: &Path, delimiter: Option<u8>) -> Result<Vec<Vec<String>>> {
    let delimiter = match delimiter {
        Some(d) => d,
        None => detect_delimiter(path)?,
    };
    let file = File::open(path).map_err(|e| io_err(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(file);
    let mut out = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| LadError::format(format!("line {}: {e}", i + 1)))?;
        if rec.len() == 1 && rec[0].is_empty() {
            continue;
        }
        out.push(rec.iter().map(str::to_string).collect());
    }
    if out.is_empty() {
        return Err(LadError::format(format!(
            "{} contains no rows",
            path.display()
        )));
    }
    Ok(out)
}

fn parse_finite(cell: &str) -> Option<f64> {
    cell.parse::<f64>().ok().filter(|v| v.is_finite())
}

fn parse_label(cell: &str) -> Option<bool> {
    let v = parse_finite(cell)?;
    (v == 0.0 || v == 1.0).then_some(v == 1.0)
}

/// Loads a numeric matrix. A first row with any non-numeric cell is taken as
/// the header. Every column except the label and id columns is a feature.
pub fn load_matrix(path: &Path, opts: &MatrixOptions) -> Result<DataMatrix> {
    let records = read_records(path, opts.delimiter)?;
    let has_header = records[0].iter().any(|c| parse_finite(c).is_none());
    let (header, body, first_line) = if has_header {
        (Some(records[0].as_slice()), &records[1..], 2)
    } else {
        (None, &records[..], 1)
    };
    let width = records[0].len();
    if body.is_empty() {
        return Err(LadError::format("file has a header but no data rows"));
    }

    let ragged: Vec<usize> = body
        .iter()
        .enumerate()
        .filter(|(_, r)| r.len() != width)
        .map(|(i, _)| i + first_line)
        .collect();
    if !ragged.is_empty() {
        return Err(LadError::format(format!(
            "rows with a field count other than {width}: lines {}",
            join_lines(&ragged)
        )));
    }

    let label_col = opts
        .label_column
        .as_ref()
        .map(|c| c.resolve(header, width))
        .transpose()?;
    let id_col = opts
        .id_column
        .as_ref()
        .map(|c| c.resolve(header, width))
        .transpose()?;
    let feature_cols: Vec<usize> = (0..width)
        .filter(|&c| Some(c) != label_col && Some(c) != id_col)
        .collect();
    if feature_cols.is_empty() {
        return Err(LadError::format("no feature columns left"));
    }

    let mut values = Vec::with_capacity(body.len() * feature_cols.len());
    let mut labels = Vec::new();
    let mut ids = Vec::new();
    let mut bad = Vec::new();
    for (i, rec) in body.iter().enumerate() {
        let parsed: Option<Vec<f64>> = feature_cols
            .iter()
            .map(|&c| parse_finite(&rec[c]))
            .collect();
        let label = label_col.map(|c| parse_label(&rec[c]));
        match (parsed, label) {
            (Some(row), None) | (Some(row), Some(Some(_))) => {
                values.extend(row);
                if let Some(Some(l)) = label {
                    labels.push(l);
                }
                if let Some(c) = id_col {
                    ids.push(rec[c].clone());
                }
            }
            _ => bad.push(i + first_line),
        }
    }
    if !bad.is_empty() {
        return Err(LadError::format(format!(
            "unparseable cells on lines {}",
            join_lines(&bad)
        )));
    }

    let mut m = DataMatrix::from_row_major(body.len(), feature_cols.len(), values)?;
    if label_col.is_some() {
        m = m.with_labels(labels)?;
    }
    if id_col.is_some() {
        m = m.with_row_ids(ids)?;
    }
    if let Some(h) = header {
        m = m.with_feature_names(feature_cols.iter().map(|&c| h[c].clone()).collect())?;
    }
    Ok(m)
}

fn join_lines(lines: &[usize]) -> String {
    const SHOWN: usize = 20;
    let mut s = lines
        .iter()
        .take(SHOWN)
        .map(usize::to_string)
        .collect::<Vec<_>>()
        .join(", ");
    if lines.len() > SHOWN {
        s.push_str(&format!(" and {} more", lines.len() - SHOWN));
    }
    s
}

/// Writes a matrix as comma-separated text with a header row; labels go in a
/// trailing `label` column. Values use the shortest round-tripping form.
pub fn write_matrix(path: &Path, m: &DataMatrix) -> Result<()> {
    let mut out = String::new();
    let names: Vec<String> = match m.feature_names() {
        Some(n) => n.to_vec(),
        None => (0..m.cols()).map(|c| format!("x{c}")).collect(),
    };
    out.push_str(&names.join(","));
    if m.labels().is_some() {
        out.push_str(",label");
    }
    out.push('\n');
    for i in 0..m.rows() {
        let cells: Vec<String> = m.row(i).iter().map(f64::to_string).collect();
        out.push_str(&cells.join(","));
        if let Some(l) = m.labels() {
            out.push_str(if l[i] { ",1" } else { ",0" });
        }
        out.push('\n');
    }
    let mut f = File::create(path).map_err(|e| io_err(path, e))?;
    f.write_all(out.as_bytes()).map_err(|e| io_err(path, e))
}

/// Column layout of a long-format panel file: one row per series and time.
#[derive(Debug, Clone, PartialEq)]
pub struct PanelSpec {
    pub value_columns: Vec<String>,
    pub id_column: String,
    pub time_column: String,
    pub population_column: Option<String>,
    /// Series below this population are dropped when a population column is set.
    pub min_population: u64,
    /// Start each series at its first step with any nonzero value.
    pub trim_leading: bool,
    pub delimiter: Option<u8>,
}

impl PanelSpec {
    pub fn new(id_column: &str, time_column: &str, value_columns: &[&str]) -> Self {
        PanelSpec {
            value_columns: value_columns.iter().map(|s| s.to_string()).collect(),
            id_column: id_column.to_string(),
            time_column: time_column.to_string(),
            population_column: None,
            min_population: 50_000,
            trim_leading: false,
            delimiter: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.value_columns.is_empty() {
            return Err(LadError::config("at least one value column is required"));
        }
        for v in &self.value_columns {
            if v == &self.id_column || v == &self.time_column {
                return Err(LadError::config(format!(
                    "value column `{v}` is also the id or time column"
                )));
            }
        }
        if self.id_column == self.time_column {
            return Err(LadError::config("id and time columns must differ"));
        }
        Ok(())
    }
}

/// Missing-value spellings that zero-fill.
fn is_missing(cell: &str) -> bool {
    matches!(
        cell.to_ascii_lowercase().as_str(),
        "" | "nan" | "na" | "n/a" | "null"
    )
}

/// Pivots a long-format file into a panel. Series keep first-appearance
/// order; time keys sort numerically when they all parse as numbers and
/// lexicographically otherwise (ISO dates sort correctly).
pub fn load_panel(path: &Path, spec: &PanelSpec) -> Result<TimeSeriesPanel> {
    spec.validate()?;
    let records = read_records(path, spec.delimiter)?;
    let header = &records[0];
    let col = |name: &str| {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| LadError::format(format!("missing column `{name}`")))
    };
    let id_col = col(&spec.id_column)?;
    let time_col = col(&spec.time_column)?;
    let value_cols: Vec<usize> = spec
        .value_columns
        .iter()
        .map(|v| col(v))
        .collect::<Result<_>>()?;
    let pop_col = spec.population_column.as_deref().map(col).transpose()?;
    let d = value_cols.len();

    let mut ids: Vec<String> = Vec::new();
    let mut id_index: HashMap<String, usize> = HashMap::new();
    let mut time_keys: Vec<String> = Vec::new();
    let mut time_index: HashMap<String, usize> = HashMap::new();
    let mut cells: HashMap<(usize, usize), (usize, Vec<f64>)> = HashMap::new();
    let mut populations: Vec<Option<f64>> = Vec::new();

    for (i, rec) in records.iter().enumerate().skip(1) {
        let line = i + 1;
        if rec.len() != header.len() {
            return Err(LadError::format(format!(
                "line {line}: {} fields, header has {}",
                rec.len(),
                header.len()
            )));
        }
        let sid = *id_index.entry(rec[id_col].clone()).or_insert_with(|| {
            ids.push(rec[id_col].clone());
            populations.push(None);
            ids.len() - 1
        });
        let tid = *time_index.entry(rec[time_col].clone()).or_insert_with(|| {
            time_keys.push(rec[time_col].clone());
            time_keys.len() - 1
        });
        let mut values = Vec::with_capacity(d);
        for &c in &value_cols {
            let cell = &rec[c];
            if is_missing(cell) {
                values.push(0.0);
            } else {
                values.push(parse_finite(cell).ok_or_else(|| {
                    LadError::format(format!(
                        "line {line}: `{cell}` in column `{}` is not numeric",
                        header[c]
                    ))
                })?);
            }
        }
        if let Some(pc) = pop_col {
            if let Some(p) = parse_finite(&rec[pc]).filter(|p| *p > 0.0) {
                match populations[sid] {
                    Some(prev) if prev != p => {
                        return Err(LadError::format(format!(
                            "line {line}: population {p} of `{}` conflicts with earlier {prev}",
                            ids[sid]
                        )))
                    }
                    _ => populations[sid] = Some(p),
                }
            }
        }
        if let Some((first, _)) = cells.insert((sid, tid), (line, values)) {
            return Err(LadError::format(format!(
                "line {line}: duplicate entry for `{}` at `{}` (first on line {first})",
                ids[sid], time_keys[tid]
            )));
        }
    }
    if ids.is_empty() {
        return Err(LadError::format("panel file has no data rows"));
    }

    // chronological order of the time keys
    let numeric: Option<Vec<f64>> = time_keys.iter().map(|k| parse_finite(k)).collect();
    let mut order: Vec<usize> = (0..time_keys.len()).collect();
    match &numeric {
        Some(v) => order.sort_by(|&a, &b| v[a].total_cmp(&v[b])),
        None => order.sort_by(|&a, &b| time_keys[a].cmp(&time_keys[b])),
    }
    let mut position = vec![0; order.len()];
    for (pos, &k) in order.iter().enumerate() {
        position[k] = pos;
    }

    let keep: Vec<usize> = (0..ids.len())
        .filter(|&s| match pop_col {
            Some(_) => populations[s].is_some_and(|p| p >= spec.min_population as f64),
            None => true,
        })
        .collect();
    if keep.is_empty() {
        return Err(LadError::format(
            "no series left after population filtering",
        ));
    }

    let length = time_keys.len();
    let mut values = vec![0.0; keep.len() * length * d];
    let mut new_index = vec![None; ids.len()];
    for (n, &s) in keep.iter().enumerate() {
        new_index[s] = Some(n);
    }
    for ((sid, tid), (_, v)) in &cells {
        if let Some(n) = new_index[*sid] {
            let t = position[*tid];
            values[(n * length + t) * d..(n * length + t + 1) * d].copy_from_slice(v);
        }
    }

    let mut panel = TimeSeriesPanel::new(keep.len(), length, d, values)?
        .with_series_ids(keep.iter().map(|&s| ids[s].clone()).collect())?
        .with_time_labels(order.iter().map(|&k| time_keys[k].clone()).collect())?;
    if pop_col.is_some() {
        panel = panel.with_normalizers(
            keep.iter()
                .map(|&s| populations[s].unwrap_or(1.0))
                .collect(),
        )?;
    }
    if spec.trim_leading {
        let offsets = (0..panel.series_count())
            .map(|n| first_nonzero_step(&panel, n).unwrap_or(0))
            .collect();
        panel = panel.with_start_offsets(offsets)?;
    }
    Ok(panel)
}

fn first_nonzero_step(panel: &TimeSeriesPanel, series: usize) -> Option<usize> {
    (0..panel.length()).find(|&t| panel.observation(series, t).iter().any(|&v| v != 0.0))
}

/// Divides every value of series `n` by `populations[n]`.
pub fn per_capita(panel: &TimeSeriesPanel, populations: &[f64]) -> Result<TimeSeriesPanel> {
    if populations.len() != panel.series_count() {
        return Err(LadError::domain(format!(
            "{} populations for {} series",
            populations.len(),
            panel.series_count()
        )));
    }
    if let Some(n) = populations
        .iter()
        .position(|p| !(*p > 0.0 && p.is_finite()))
    {
        return Err(LadError::domain(format!(
            "population of series {n} must be positive, got {}",
            populations[n]
        )));
    }
    let per_series = panel.length() * panel.feature_count();
    let values = panel
        .values()
        .chunks(per_series)
        .zip(populations)
        .flat_map(|(series, &p)| series.iter().map(move |v| v / p))
        .collect();
    panel.with_values(values)
}

/// Daily counts from cumulative counts.
#[derive(Debug, Clone, PartialEq)]
pub struct Differenced {
    pub panel: TimeSeriesPanel,
    /// Negative differences (downward corrections) replaced by zero.
    pub clamped: usize,
}

pub fn diff_to_new_counts(panel: &TimeSeriesPanel) -> Result<Differenced> {
    let (length, d) = (panel.length(), panel.feature_count());
    let mut values = panel.values().to_vec();
    let mut clamped = 0;
    for series in values.chunks_mut(length * d) {
        for t in (1..length).rev() {
            for f in 0..d {
                let diff = series[t * d + f] - series[(t - 1) * d + f];
                series[t * d + f] = if diff < 0.0 {
                    clamped += 1;
                    0.0
                } else {
                    diff
                };
            }
        }
        for v in &mut series[..d] {
            if *v < 0.0 {
                *v = 0.0;
                clamped += 1;
            }
        }
    }
    Ok(Differenced {
        panel: panel.with_values(values)?,
        clamped,
    })
}
