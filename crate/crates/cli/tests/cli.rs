use std::fs;
use std::path::Path;
use std::process::Command;

use lad_core::ingest::{load_matrix, ColumnRef, MatrixOptions};
use lad_core::{fit, roc_auc, LadConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use tempfile::TempDir;

struct Out {
    code: i32,
    stdout: String,
    stderr: String,
}

fn lad(args: &[&str]) -> Out {
    let out = Command::new(env!("CARGO_BIN_EXE_lad"))
        .args(args)
        .output()
        .unwrap();
    Out {
        code: out.status.code().unwrap(),
        stdout: String::from_utf8(out.stdout).unwrap(),
        stderr: String::from_utf8(out.stderr).unwrap(),
    }
}

fn body_rows(text: &str) -> Vec<Vec<String>> {
    text.lines()
        .filter(|l| !l.starts_with('#') && !l.is_empty())
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

fn write_matrix(dir: &Path, rows: usize, cols: usize, seed: u64) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut text = (0..cols)
        .map(|c| format!("x{c}"))
        .collect::<Vec<_>>()
        .join(",")
        + ",label\n";
    for r in 0..rows {
        let outlier = r % 25 == 0;
        let vals: Vec<String> = (0..cols)
            .map(|_| {
                let v: f64 = rng.sample(StandardNormal);
                (if outlier { v + 7.0 } else { v }).to_string()
            })
            .collect();
        text += &format!("{},{}\n", vals.join(","), u8::from(outlier));
    }
    let path = dir.join(format!("m{seed}.csv"));
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

fn write_panel(dir: &Path, series: usize, length: usize) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut text = String::from("id,time,cases,deaths\n");
    for s in 0..series {
        for t in 0..length {
            let bump = if s == 2 && t >= length / 2 { 40.0 } else { 0.0 };
            let a = 10.0 * t as f64 + rng.sample::<f64, _>(StandardNormal) + bump;
            let b = 2.0 * t as f64 + rng.sample::<f64, _>(StandardNormal);
            text += &format!("c{s},{t},{a},{b}\n");
        }
    }
    let path = dir.join("panel.csv");
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn exit_codes() {
    let dir = TempDir::new().unwrap();
    let m = write_matrix(dir.path(), 60, 3, 1);
    assert_eq!(lad(&["detect", &m, "--label-column", "label"]).code, 0);
    assert_eq!(lad(&["--help"]).code, 0);
    assert_eq!(lad(&["--version"]).code, 0);

    let missing = lad(&["detect", "/nonexistent/file.csv"]);
    assert_eq!(missing.code, 2, "{}", missing.stderr);
    let bad = dir.path().join("bad.csv");
    fs::write(&bad, "a,b\n1,2\n3,oops\n").unwrap();
    let bad_out = lad(&["detect", bad.to_str().unwrap()]);
    assert_eq!(bad_out.code, 2);
    assert!(bad_out.stderr.contains('3'), "{}", bad_out.stderr);

    for args in [
        vec!["detect", m.as_str(), "--quantile-level", "1.5"],
        vec!["detect", m.as_str(), "--n-iter", "0"],
        vec!["detect", m.as_str(), "--no-such-flag"],
        vec!["frobnicate"],
        vec!["bench"],
    ] {
        assert_eq!(lad(&args).code, 3, "{args:?}");
    }
    let p = write_panel(dir.path(), 6, 5);
    let full_with_window = lad(&[
        "stream",
        &p,
        "--value-columns",
        "cases",
        "--history",
        "full",
        "--window",
        "2",
    ]);
    assert_eq!(full_with_window.code, 3);
    let per_capita = lad(&["stream", &p, "--value-columns", "cases", "--per-capita"]);
    assert_eq!(per_capita.code, 3);
}

#[test]
fn outputs_are_deterministic_and_carry_a_manifest() {
    let dir = TempDir::new().unwrap();
    let m = write_matrix(dir.path(), 120, 4, 2);
    let a = lad(&["detect", &m, "--label-column", "label"]).stdout;
    let b = lad(&["detect", &m, "--label-column", "label", "--threads", "3"]).stdout;
    assert_eq!(a, b);
    assert!(a.starts_with("# command: detect\n"));
    assert!(a.contains("# input_digest: sha256:"));
    assert!(a.contains("# config: initial-threshold=0.95 quantile-level=0.95 n-iter=5"));

    let p = write_panel(dir.path(), 8, 6);
    let s1 = lad(&[
        "stream",
        &p,
        "--value-columns",
        "cases,deaths",
        "--history",
        "full",
    ])
    .stdout;
    let s2 = lad(&[
        "stream",
        &p,
        "--value-columns",
        "cases,deaths",
        "--history",
        "full",
    ])
    .stdout;
    assert_eq!(s1, s2);
}

#[test]
fn detect_matches_the_library() {
    let dir = TempDir::new().unwrap();
    let m = write_matrix(dir.path(), 200, 5, 3);
    let out = lad(&["detect", &m, "--label-column", "label"]);
    let rows = body_rows(&out.stdout);

    let opts = MatrixOptions {
        label_column: Some(ColumnRef::parse("label")),
        ..Default::default()
    };
    let data = load_matrix(Path::new(&m), &opts).unwrap();
    let state = fit(&data, &LadConfig::default()).unwrap();
    assert_eq!(rows.len(), 200);
    for (i, row) in rows.iter().enumerate() {
        assert_eq!(row[0], i.to_string());
        assert_eq!(row[1].parse::<f64>().unwrap(), state.scores[i]);
        assert_eq!(row[2] == "1", state.flags[i]);
    }
}

#[test]
fn eval_matches_the_library_and_extremes() {
    let dir = TempDir::new().unwrap();
    let m = write_matrix(dir.path(), 150, 3, 4);
    let scores = dir.path().join("scores.csv");
    let det = lad(&[
        "detect",
        &m,
        "--label-column",
        "label",
        "-o",
        scores.to_str().unwrap(),
    ]);
    assert_eq!(det.code, 0);
    let out = lad(&[
        "eval",
        scores.to_str().unwrap(),
        "--labels-from",
        &m,
        "--label-column",
        "label",
    ]);
    assert_eq!(out.code, 0, "{}", out.stderr);
    let metric = |text: &str, name: &str| -> f64 {
        body_rows(text).into_iter().find(|r| r[0] == name).unwrap()[1]
            .parse()
            .unwrap()
    };
    let opts = MatrixOptions {
        label_column: Some(ColumnRef::parse("label")),
        ..Default::default()
    };
    let data = load_matrix(Path::new(&m), &opts).unwrap();
    let state = fit(&data, &LadConfig::default()).unwrap();
    let want = roc_auc(&state.scores, data.labels().unwrap()).unwrap().auc;
    assert_eq!(metric(&out.stdout, "auc"), want);

    let truth: Vec<u8> = (0..20).map(|i| u8::from(i % 4 == 0)).collect();
    let truth_path = dir.path().join("truth.txt");
    fs::write(
        &truth_path,
        truth.iter().map(|t| format!("{t}\n")).collect::<String>(),
    )
    .unwrap();
    for (sign, expected) in [(1.0, 1.0), (-1.0, 0.0)] {
        let path = dir.path().join("s.txt");
        let text: String = truth
            .iter()
            .enumerate()
            .map(|(i, &t)| format!("{}\n", sign * (t as f64 * 10.0 + i as f64 * 0.01)))
            .collect();
        fs::write(&path, text).unwrap();
        let out = lad(&[
            "eval",
            path.to_str().unwrap(),
            "--truth",
            truth_path.to_str().unwrap(),
            "--roc",
        ]);
        assert_eq!(metric(&out.stdout, "auc"), expected);
        assert!(out.stdout.contains("# section: roc"));
    }
}

#[test]
fn step_window_zero_is_the_default_stream() {
    let dir = TempDir::new().unwrap();
    let p = write_panel(dir.path(), 10, 8);
    let base = lad(&["stream", &p, "--value-columns", "cases,deaths"]);
    let explicit = lad(&[
        "stream",
        &p,
        "--value-columns",
        "cases,deaths",
        "--history",
        "step",
        "--window",
        "0",
    ]);
    assert_eq!(base.code, 0, "{}", base.stderr);
    assert_eq!(base.stdout, explicit.stdout);
    assert!(base.stdout.contains("# section: aggregate"));

    let prefix = dir.path().join("run");
    let files = lad(&[
        "stream",
        &p,
        "--value-columns",
        "cases",
        "--output-prefix",
        prefix.to_str().unwrap(),
    ]);
    assert_eq!(files.code, 0);
    for suffix in ["scores", "aggregate", "thresholds"] {
        let text = fs::read_to_string(dir.path().join(format!("run.{suffix}.csv"))).unwrap();
        assert!(text.starts_with("# command: stream"));
    }
    let agg = fs::read_to_string(dir.path().join("run.aggregate.csv")).unwrap();
    assert_eq!(body_rows(&agg)[0][1], "c2");
}

#[test]
fn single_step_stream_equals_detect() {
    let dir = TempDir::new().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut panel = String::from("id,time,a,b\n");
    let mut matrix = String::from("id,a,b\n");
    for s in 0..30 {
        let (a, b): (f64, f64) = (rng.sample(StandardNormal), rng.random_range(0.0..5.0));
        panel += &format!("s{s:02},0,{a},{b}\n");
        matrix += &format!("s{s:02},{a},{b}\n");
    }
    let (pp, mp) = (dir.path().join("p.csv"), dir.path().join("m.csv"));
    fs::write(&pp, panel).unwrap();
    fs::write(&mp, matrix).unwrap();
    let stream = lad(&["stream", pp.to_str().unwrap(), "--value-columns", "a,b"]).stdout;
    let detect = lad(&["detect", mp.to_str().unwrap(), "--id-column", "id"]).stdout;
    let scores_section: String = stream
        .split("# section: aggregate")
        .next()
        .unwrap()
        .to_string();
    let streamed: Vec<(String, String, String)> = body_rows(&scores_section)
        .into_iter()
        .map(|r| (r[0].clone(), r[2].clone(), r[3].clone()))
        .collect();
    let detected: Vec<(String, String, String)> = body_rows(&detect)
        .into_iter()
        .map(|r| (r[0].clone(), r[1].clone(), r[2].clone()))
        .collect();
    assert_eq!(streamed, detected);
}

#[test]
fn bench_reports_both_sweeps() {
    let out = lad(&[
        "bench",
        "--rows-sweep",
        "--dims-sweep",
        "--rows",
        "200,400",
        "--cols",
        "3",
        "--dims",
        "1-3",
        "--dims-rows",
        "300",
        "--repeats",
        "1",
    ]);
    assert_eq!(out.code, 0, "{}", out.stderr);
    let rows = body_rows(&out.stdout);
    assert_eq!(rows.len(), 5);
    assert!(out.stdout.contains("# loglog_slope.rows: "));
    assert!(out.stdout.contains("# loglog_slope.dims: "));
    assert!(out.stdout.contains("# threads: 1"));
}
