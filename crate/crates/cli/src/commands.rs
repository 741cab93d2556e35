use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use lad_core::bench::{dims_sweep, loglog_slope, rows_sweep, BenchPoint};
use lad_core::eval::{compare_scores, parse_score_text, rank_auc, top_k_confusion};
use lad_core::ingest::{
    diff_to_new_counts, load_matrix, load_panel, per_capita, ColumnRef, MatrixOptions, PanelSpec,
};
use lad_core::{fit, roc_auc, run, LadConfig, LadError, Result, ThresholdCarry, Window};

use crate::manifest::RunManifest;

#[derive(Debug, Parser)]
#[command(name = "lad", version, about = "Large-deviations anomaly detection")]
pub struct Cli {
    /// Cap on worker threads. Defaults to all cores, or 1 for `bench`.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Score and flag the rows of a matrix file.
    Detect(DetectArgs),
    /// Score a long-format panel of time series step by step.
    Stream(StreamArgs),
    /// ROC-AUC and top-k counts of a score file against ground truth.
    Eval(EvalArgs),
    /// Time fits on synthetic Gaussian data across row or dimension sweeps.
    Bench(BenchArgs),
}

#[derive(Debug, Clone, Args)]
struct ConfigArgs {
    #[arg(long, default_value_t = 0.95)]
    initial_threshold: f64,
    #[arg(long, default_value_t = 0.95)]
    quantile_level: f64,
    #[arg(long, default_value_t = 5)]
    n_iter: usize,
    #[arg(long, default_value_t = 1e-12)]
    epsilon: f64,
    #[arg(long, default_value_t = 0.05)]
    min_unflagged_fraction: f64,
}

impl ConfigArgs {
    fn to_config(&self) -> Result<LadConfig> {
        let cfg = LadConfig {
            initial_threshold: self.initial_threshold,
            quantile_level: self.quantile_level,
            n_iter: self.n_iter,
            epsilon: self.epsilon,
            min_unflagged_fraction: self.min_unflagged_fraction,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

fn parse_delimiter(s: &str) -> std::result::Result<u8, String> {
    match s {
        "," | "comma" => Ok(b','),
        "\t" | "\\t" | "tab" => Ok(b'\t'),
        ";" | "semicolon" => Ok(b';'),
        other => Err(format!(
            "unsupported delimiter `{other}`; use comma, tab or semicolon"
        )),
    }
}

/// Counts given as `1000,2000` or ranges such as `1-29`, mixed freely.
#[derive(Debug, Clone, PartialEq, Eq)]
struct SizeList(Vec<usize>);

fn parse_list(s: &str) -> std::result::Result<SizeList, String> {
    let mut out = Vec::new();
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let num = |v: &str| {
            v.trim()
                .parse::<usize>()
                .map_err(|_| format!("`{v}` is not a count"))
        };
        match part.split_once('-') {
            Some((a, b)) => {
                let (a, b) = (num(a)?, num(b)?);
                if a > b {
                    return Err(format!("empty range `{part}`"));
                }
                out.extend(a..=b);
            }
            None => out.push(num(part)?),
        }
    }
    if out.is_empty() {
        return Err("empty list".into());
    }
    Ok(SizeList(out))
}

#[derive(Debug, Args)]
struct DetectArgs {
    input: PathBuf,
    /// Ground-truth column, by header name or zero-based index; excluded from features.
    #[arg(long)]
    label_column: Option<String>,
    /// Row identifier column; excluded from features.
    #[arg(long)]
    id_column: Option<String>,
    #[arg(long, value_parser = parse_delimiter)]
    delimiter: Option<u8>,
    #[command(flatten)]
    config: ConfigArgs,
    /// Write here instead of stdout.
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum CountMode {
    /// Cumulative counts as given.
    Total,
    /// Day-over-day differences, negative corrections clamped to zero.
    New,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum History {
    /// Window grows to the whole history at every step.
    Full,
    /// Fixed window set by `--window`.
    Step,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum CarryArg {
    Reset,
    Carry,
}

#[derive(Debug, Args)]
struct StreamArgs {
    input: PathBuf,
    #[arg(long, default_value = "id")]
    id_column: String,
    #[arg(long, default_value = "time")]
    time_column: String,
    #[arg(long, value_delimiter = ',', required = true)]
    value_columns: Vec<String>,
    #[arg(long)]
    population_column: Option<String>,
    #[arg(long, default_value_t = 50_000)]
    min_population: u64,
    /// Start each series at its first nonzero observation.
    #[arg(long)]
    trim_leading: bool,
    /// Divide each series by its population (needs --population-column).
    #[arg(long)]
    per_capita: bool,
    #[arg(long, value_enum, default_value_t = CountMode::Total)]
    mode: CountMode,
    #[arg(long, value_enum, default_value_t = History::Step)]
    history: History,
    /// Preceding steps stacked next to the current one (step history only).
    #[arg(long)]
    window: Option<usize>,
    #[arg(long, value_enum, default_value_t = CarryArg::Reset)]
    threshold_carry: CarryArg,
    #[arg(long, value_parser = parse_delimiter)]
    delimiter: Option<u8>,
    #[command(flatten)]
    config: ConfigArgs,
    /// Write PREFIX.scores.csv, PREFIX.aggregate.csv and PREFIX.thresholds.csv
    /// instead of printing all three sections to stdout.
    #[arg(long)]
    output_prefix: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct EvalArgs {
    /// Output of `lad detect`, or a headerless single-column score file.
    scores: PathBuf,
    /// Headerless single-column file of 0/1 labels.
    #[arg(long, conflicts_with = "labels_from")]
    truth: Option<PathBuf>,
    /// Matrix file carrying the labels in --label-column.
    #[arg(long, requires = "label_column")]
    labels_from: Option<PathBuf>,
    #[arg(long)]
    label_column: Option<String>,
    /// Scores of another detector to compare against.
    #[arg(long)]
    external: Option<PathBuf>,
    /// Also print every ROC point.
    #[arg(long)]
    roc: bool,
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct BenchArgs {
    /// Vary the number of rows at fixed --cols.
    #[arg(long)]
    rows_sweep: bool,
    /// Vary the number of leading dimensions at fixed --dims-rows.
    #[arg(long)]
    dims_sweep: bool,
    #[arg(long, value_parser = parse_list, default_value = "1000,2000,4000,8000")]
    rows: SizeList,
    #[arg(long, default_value_t = 29)]
    cols: usize,
    #[arg(long, value_parser = parse_list, default_value = "1-29")]
    dims: SizeList,
    #[arg(long, default_value_t = 10_000)]
    dims_rows: usize,
    #[arg(long, default_value_t = 3)]
    repeats: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    config: ConfigArgs,
    #[arg(long, short)]
    output: Option<PathBuf>,
}

pub fn dispatch(cli: Cli) -> Result<()> {
    let threads = match (&cli.command, cli.threads) {
        (_, Some(n)) => Some(n),
        (Command::Bench(_), None) => Some(1),
        _ => None,
    };
    if let Some(n) = threads {
        if n == 0 {
            return Err(LadError::Config("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| LadError::Config(format!("cannot size thread pool: {e}")))?;
    }
    match cli.command {
        Command::Detect(a) => detect(a),
        Command::Stream(a) => stream(a),
        Command::Eval(a) => eval(a),
        Command::Bench(a) => bench(a),
    }
}

fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|source| LadError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn emit(path: Option<&Path>, text: &str) -> Result<()> {
    let io = |p: &Path, source| LadError::Io {
        path: p.to_path_buf(),
        source,
    };
    match path {
        Some(p) => fs::write(p, text).map_err(|e| io(p, e)),
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| io(Path::new("<stdout>"), e)),
    }
}

fn csv_rows(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> String {
    let mut w = csv::WriterBuilder::new().from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for r in rows {
        w.write_record(&r).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 fields")
}

fn flag(f: bool) -> String {
    if f { "1" } else { "0" }.to_string()
}

fn detect(a: DetectArgs) -> Result<()> {
    let cfg = a.config.to_config()?;
    let bytes = read_bytes(&a.input)?;
    let opts = MatrixOptions {
        label_column: a.label_column.as_deref().map(ColumnRef::parse),
        id_column: a.id_column.as_deref().map(ColumnRef::parse),
        delimiter: a.delimiter,
    };
    let data = load_matrix(&a.input, &opts)?;
    let state = fit(&data, &cfg)?;

    let manifest = RunManifest::new("detect")
        .with_config(cfg)
        .with_input(&bytes)
        .set("rows", data.rows())
        .set("cols", data.cols())
        .set("iterations_run", state.iterations_run)
        .set("threshold", state.threshold)
        .set("flagged", state.flagged_count());
    let ids: Vec<String> = match data.row_ids() {
        Some(ids) => ids.to_vec(),
        None => (0..data.rows()).map(|i| i.to_string()).collect(),
    };
    let rows = ids
        .into_iter()
        .zip(state.scores.iter().zip(&state.flags))
        .map(|(id, (s, f))| vec![id, s.to_string(), flag(*f)]);
    let text = manifest.render() + &csv_rows(&["id", "score", "flag"], rows);
    emit(a.output.as_deref(), &text)
}

fn stream(a: StreamArgs) -> Result<()> {
    let cfg = a.config.to_config()?;
    let window = match (a.history, a.window) {
        (History::Full, Some(_)) => {
            return Err(LadError::Config(
                "--window applies to --history step only".into(),
            ))
        }
        (History::Full, None) => Window::FullHistory,
        (History::Step, w) => Window::Fixed(w.unwrap_or(0)),
    };
    if a.per_capita && a.population_column.is_none() {
        return Err(LadError::Config(
            "--per-capita needs --population-column".into(),
        ));
    }
    let carry = match a.threshold_carry {
        CarryArg::Reset => ThresholdCarry::Reset,
        CarryArg::Carry => ThresholdCarry::Carry,
    };
    let spec = PanelSpec {
        value_columns: a.value_columns.clone(),
        id_column: a.id_column.clone(),
        time_column: a.time_column.clone(),
        population_column: a.population_column.clone(),
        min_population: a.min_population,
        trim_leading: a.trim_leading,
        delimiter: a.delimiter,
    };
    let bytes = read_bytes(&a.input)?;
    let mut panel = load_panel(&a.input, &spec)?;
    if a.per_capita {
        let pops = panel
            .normalizers()
            .expect("population column loaded")
            .to_vec();
        panel = per_capita(&panel, &pops)?;
    }
    let mut clamped = None;
    if a.mode == CountMode::New {
        let d = diff_to_new_counts(&panel)?;
        clamped = Some(d.clamped);
        panel = d.panel;
    }
    let out = run(&panel, &cfg, window, carry)?;

    let mut manifest = RunManifest::new("stream")
        .with_config(cfg)
        .with_input(&bytes)
        .set("series", panel.series_count())
        .set("length", panel.length())
        .set("features", panel.feature_count())
        .set("value_columns", a.value_columns.join(","))
        .set("mode", format!("{:?}", a.mode).to_lowercase())
        .set(
            "window",
            match window {
                Window::FullHistory => "full".to_string(),
                Window::Fixed(w) => w.to_string(),
            },
        )
        .set(
            "threshold_carry",
            format!("{:?}", a.threshold_carry).to_lowercase(),
        )
        .set("per_capita", a.per_capita)
        .set("trim_leading", a.trim_leading);
    if let Some(p) = &a.population_column {
        manifest = manifest.set("population_filter", format!("{p}>={}", a.min_population));
    }
    if let Some(c) = clamped {
        manifest = manifest.set("clamped_corrections", c);
    }
    let header = manifest.render();

    let ids = panel.series_ids();
    let times = panel.time_labels();
    let mut score_rows = Vec::new();
    for (n, id) in ids.iter().enumerate() {
        for (t, label) in times.iter().enumerate().skip(panel.start_offsets()[n]) {
            score_rows.push(vec![
                id.clone(),
                label.clone(),
                out.score(n, t).to_string(),
                flag(out.flag(n, t)),
            ]);
        }
    }
    let scores = csv_rows(&["id", "t", "score", "flag"], score_rows);
    let aggregate = csv_rows(
        &[
            "rank",
            "id",
            "aggregate",
            "flagged_steps",
            "effective_length",
        ],
        out.ranking().into_iter().enumerate().map(|(r, n)| {
            vec![
                (r + 1).to_string(),
                ids[n].clone(),
                out.aggregate[n].to_string(),
                out.flagged_steps(n).to_string(),
                panel.effective_length(n).to_string(),
            ]
        }),
    );
    let thresholds = csv_rows(
        &["t", "threshold", "iterations"],
        times.iter().enumerate().map(|(t, label)| {
            vec![
                label.clone(),
                out.thresholds[t].to_string(),
                out.iterations[t].to_string(),
            ]
        }),
    );

    match &a.output_prefix {
        Some(prefix) => {
            for (suffix, body) in [
                ("scores", &scores),
                ("aggregate", &aggregate),
                ("thresholds", &thresholds),
            ] {
                let mut path = prefix.clone().into_os_string();
                path.push(format!(".{suffix}.csv"));
                let text = format!("{header}# section: {suffix}\n{body}");
                emit(Some(Path::new(&path)), &text)?;
            }
            Ok(())
        }
        None => {
            let text = format!(
                "{header}# section: scores\n{scores}\n# section: aggregate\n{aggregate}\n# section: thresholds\n{thresholds}"
            );
            emit(None, &text)
        }
    }
}

/// Reads a single-column score file or the `score` column of `lad detect` output.
fn read_scores(path: &Path) -> Result<Vec<f64>> {
    let bytes = read_bytes(path)?;
    let text = String::from_utf8_lossy(&bytes);
    let first = text
        .lines()
        .map(str::trim)
        .find(|l| !l.is_empty() && !l.starts_with('#'));
    match first {
        Some(l) if l.parse::<f64>().is_err() => {
            let body: String = text
                .lines()
                .filter(|l| !l.trim_start().starts_with('#'))
                .map(|l| format!("{l}\n"))
                .collect();
            let mut r = csv::Reader::from_reader(body.as_bytes());
            let header = r
                .headers()
                .map_err(|e| LadError::Format(format!("{}: {e}", path.display())))?
                .clone();
            let col = header.iter().position(|h| h == "score").ok_or_else(|| {
                LadError::Format(format!("{}: no `score` column", path.display()))
            })?;
            r.records()
                .enumerate()
                .map(|(i, rec)| {
                    let rec =
                        rec.map_err(|e| LadError::Format(format!("record {}: {e}", i + 1)))?;
                    rec.get(col)
                        .and_then(|v| v.parse::<f64>().ok())
                        .filter(|v| v.is_finite())
                        .ok_or_else(|| LadError::Format(format!("record {}: bad score", i + 1)))
                })
                .collect()
        }
        _ => parse_score_text(&text),
    }
}

fn read_truth(path: &Path) -> Result<Vec<bool>> {
    let text = String::from_utf8_lossy(&read_bytes(path)?).into_owned();
    parse_score_text(&text)?
        .into_iter()
        .enumerate()
        .map(|(i, v)| {
            if v == 0.0 || v == 1.0 {
                Ok(v == 1.0)
            } else {
                Err(LadError::Format(format!(
                    "truth value {v} at row {} is not 0 or 1",
                    i + 1
                )))
            }
        })
        .collect()
}

fn eval(a: EvalArgs) -> Result<()> {
    let scores = read_scores(&a.scores)?;
    let (truth, truth_bytes) = match (&a.truth, &a.labels_from) {
        (Some(p), _) => (read_truth(p)?, read_bytes(p)?),
        (None, Some(p)) => {
            let opts = MatrixOptions {
                label_column: a.label_column.as_deref().map(ColumnRef::parse),
                ..Default::default()
            };
            let m = load_matrix(p, &opts)?;
            (
                m.labels().expect("label column requested").to_vec(),
                read_bytes(p)?,
            )
        }
        (None, None) => {
            return Err(LadError::Config(
                "one of --truth or --labels-from is required".into(),
            ))
        }
    };
    if scores.len() != truth.len() {
        return Err(LadError::Format(format!(
            "{} scores but {} truth rows",
            scores.len(),
            truth.len()
        )));
    }
    let roc = roc_auc(&scores, &truth)?;
    let confusion = top_k_confusion(&scores, &truth)?;
    let positives = truth.iter().filter(|&&t| t).count();

    let mut manifest = RunManifest::new("eval")
        .with_input(&read_bytes(&a.scores)?)
        .set("truth_digest", crate::manifest::digest(&truth_bytes));
    let mut rows = vec![
        vec!["auc".into(), roc.auc.to_string()],
        vec!["rank_auc".into(), rank_auc(&scores, &truth)?.to_string()],
        vec!["rows".into(), scores.len().to_string()],
        vec!["positives".into(), positives.to_string()],
        vec!["top_k".into(), positives.to_string()],
        vec!["true_positive".into(), confusion.true_positive.to_string()],
        vec![
            "false_positive".into(),
            confusion.false_positive.to_string(),
        ],
        vec![
            "false_negative".into(),
            confusion.false_negative.to_string(),
        ],
        vec!["true_negative".into(), confusion.true_negative.to_string()],
    ];
    if let Some(ext) = &a.external {
        let ext_bytes = read_bytes(ext)?;
        manifest = manifest.set("external_digest", crate::manifest::digest(&ext_bytes));
        let report = compare_scores(&roc, &read_scores(ext)?, &truth)?;
        rows.push(vec!["external_auc".into(), report.external_auc.to_string()]);
        rows.push(vec!["auc_difference".into(), report.difference.to_string()]);
    }
    let mut text = manifest.render() + &csv_rows(&["metric", "value"], rows);
    if a.roc {
        text.push_str("\n# section: roc\n");
        text.push_str(&csv_rows(
            &["fpr", "tpr"],
            roc.points
                .iter()
                .map(|(x, y)| vec![x.to_string(), y.to_string()]),
        ));
    }
    emit(a.output.as_deref(), &text)
}

fn bench(a: BenchArgs) -> Result<()> {
    if !a.rows_sweep && !a.dims_sweep {
        return Err(LadError::Config(
            "choose --rows-sweep, --dims-sweep or both".into(),
        ));
    }
    let cfg = a.config.to_config()?;
    let mut manifest = RunManifest::new("bench")
        .with_config(cfg)
        .with_seed(a.seed)
        .set("repeats", a.repeats)
        .set("threads", rayon::current_num_threads());
    let mut sweeps: Vec<(&str, Vec<BenchPoint>)> = Vec::new();
    if a.rows_sweep {
        manifest = manifest.set("rows_sweep", format!("rows={:?} cols={}", a.rows.0, a.cols));
        sweeps.push((
            "rows",
            rows_sweep(&a.rows.0, a.cols, a.repeats, a.seed, &cfg)?,
        ));
    }
    if a.dims_sweep {
        manifest = manifest.set(
            "dims_sweep",
            format!("rows={} dims={:?}", a.dims_rows, a.dims.0),
        );
        sweeps.push((
            "dims",
            dims_sweep(a.dims_rows, &a.dims.0, a.repeats, a.seed, &cfg)?,
        ));
    }
    let rows = sweeps.iter().flat_map(|(name, pts)| {
        pts.iter().map(move |p| {
            vec![
                name.to_string(),
                p.rows.to_string(),
                p.cols.to_string(),
                format!("{:.9}", p.seconds),
            ]
        })
    });
    let mut text = manifest.render() + &csv_rows(&["sweep", "rows", "cols", "seconds"], rows);
    for (name, pts) in &sweeps {
        let xy: Vec<(f64, f64)> = pts
            .iter()
            .map(|p| {
                let x = if *name == "rows" { p.rows } else { p.cols };
                (x as f64, p.seconds)
            })
            .collect();
        match loglog_slope(&xy) {
            Some(s) => text.push_str(&format!("# loglog_slope.{name}: {s:.4}\n")),
            None => text.push_str(&format!("# loglog_slope.{name}: undefined\n")),
        }
    }
    emit(a.output.as_deref(), &text)
}
