//! Straightforward reimplementation of the scoring loops, written from the
//! method description without sharing code with the library.
#![allow(dead_code, clippy::needless_range_loop)]

pub struct RefConfig {
    pub threshold: f64,
    pub q: f64,
    pub n_iter: usize,
    pub eps: f64,
    pub min_frac: f64,
}

pub const DEFAULT: RefConfig = RefConfig {
    threshold: 0.95,
    q: 0.95,
    n_iter: 5,
    eps: 1e-12,
    min_frac: 0.05,
};

/// Returns (scores, flags, threshold).
pub fn ref_loop(
    x: &[Vec<f64>],
    active: &[bool],
    seed: &[bool],
    c: &RefConfig,
) -> (Vec<f64>, Vec<bool>, f64) {
    let (n, d) = (x.len(), x[0].len());
    let act: Vec<usize> = (0..n).filter(|&i| active[i]).collect();
    let na = act.len() as f64;
    let mut flags: Vec<bool> = (0..n).map(|i| seed[i] && active[i]).collect();
    let (mut out_s, mut out_f, mut th) = (vec![0.0; n], vec![false; n], c.threshold);
    for pass in 0..if act.len() < 2 { 0 } else { c.n_iter } {
        let keep: Vec<usize> = act.iter().copied().filter(|&i| !flags[i]).collect();
        let k = keep.len() as f64;
        let mut s = vec![0.0f64; n];
        for j in 0..d {
            let m = keep.iter().map(|&i| x[i][j]).sum::<f64>() / k;
            let var = keep.iter().map(|&i| (x[i][j] - m).powi(2)).sum::<f64>() / (k - 1.0);
            let sd = if keep.len() > 1 {
                var.sqrt().max(c.eps)
            } else {
                c.eps
            };
            for &i in &act {
                s[i] = s[i].max(((x[i][j] - m) / sd).powi(2) / 2.0 / na);
            }
        }
        let lo = act.iter().map(|&i| s[i]).fold(f64::INFINITY, f64::min);
        let hi = act.iter().map(|&i| s[i]).fold(f64::NEG_INFINITY, f64::max);
        let s: Vec<f64> = (0..n)
            .map(|i| {
                if active[i] && hi > lo {
                    (s[i] - lo) / (hi - lo)
                } else {
                    0.0
                }
            })
            .collect();
        let mut v: Vec<f64> = act.iter().map(|&i| s[i]).collect();
        v.sort_by(f64::total_cmp);
        let h = (v.len() - 1) as f64 * c.q;
        let (a, b) = (
            h.floor() as usize,
            (h.floor() as usize + 1).min(v.len() - 1),
        );
        let new_th = th.min(v[a] + (h - a as f64) * (v[b] - v[a]));
        let new_flags: Vec<bool> = s.iter().map(|&v| v > new_th).collect();
        if na - (new_flags.iter().filter(|f| **f).count() as f64) < c.min_frac * na {
            out_s = if pass == 0 { s } else { out_s };
            break;
        }
        let changed = new_flags != flags;
        (th, flags, out_s, out_f) = (new_th, new_flags.clone(), s, new_flags);
        if !changed {
            break;
        }
    }
    (out_s, out_f, th)
}

pub type StepResult = (Vec<f64>, Vec<bool>);

/// Panel is `[series][time][feature]`; `w = None` means full history.
/// Returns per-step (scores, flags) and the aggregates.
pub fn ref_temporal(
    panel: &[Vec<Vec<f64>>],
    starts: &[usize],
    w: Option<usize>,
    c: &RefConfig,
) -> (Vec<StepResult>, Vec<f64>) {
    let (n, t_len, d) = (panel.len(), panel[0].len(), panel[0][0].len());
    let mut prev = vec![false; n];
    let mut steps = Vec::new();
    for t in 0..t_len {
        let w = w.unwrap_or(t);
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                let mut row = Vec::new();
                for k in 0..=w {
                    let src = t as i64 - w as i64 + k as i64;
                    if src >= starts[i] as i64 {
                        row.extend_from_slice(&panel[i][src as usize]);
                    } else {
                        row.extend(vec![0.0; d]);
                    }
                }
                row
            })
            .collect();
        let active: Vec<bool> = starts.iter().map(|&s| s <= t).collect();
        let (s, f, _) = ref_loop(&rows, &active, &prev, c);
        prev = f.clone();
        steps.push((s, f));
    }
    let agg = (0..n)
        .map(|i| steps.iter().filter(|(_, f)| f[i]).count() as f64 / (t_len - starts[i]) as f64)
        .collect();
    (steps, agg)
}

pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}
