use lad_core::eval::rank_auc;
use lad_core::{fit, roc_auc, DataMatrix, LadConfig, ScoreState};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

const CASES: u32 = 1000;

/// Gaussian rows with a few planted outliers, optionally degenerate.
fn sample_matrix(seed: u64, rows: usize, cols: usize, kind: u8) -> DataMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v: Vec<f64> = (0..rows * cols)
        .map(|_| rng.sample(StandardNormal))
        .collect();
    match kind {
        // constant columns
        1 => {
            for r in 0..rows {
                v[r * cols] = 3.5;
            }
        }
        // heavily duplicated rows
        2 => {
            for r in 1..rows {
                if rng.random_bool(0.7) {
                    let (head, tail) = v.split_at_mut(r * cols);
                    tail[..cols].copy_from_slice(&head[..cols]);
                }
            }
        }
        // extreme magnitudes
        3 => {
            for x in &mut v {
                *x *= 1e150;
            }
        }
        4 => {
            for x in &mut v {
                *x *= 1e-150;
            }
        }
        // everything identical
        5 => v.fill(-2.0),
        _ => {}
    }
    for _ in 0..rows / 10 {
        let i = rng.random_range(0..rows * cols);
        v[i] += v[i].abs().max(1.0) * rng.random_range(3.0..8.0);
    }
    DataMatrix::from_row_major(rows, cols, v).unwrap()
}

fn dims() -> impl Strategy<Value = (u64, usize, usize)> {
    (any::<u64>(), 2usize..120, 1usize..12)
}

/// Flag agreement, ignoring rows whose score sits within `tol` of either threshold.
fn flags_agree(a: &ScoreState, b: &ScoreState, map: impl Fn(usize) -> usize, tol: f64) -> bool {
    (0..a.len()).all(|i| {
        let j = map(i);
        let near =
            (a.scores[i] - a.threshold).abs() < tol || (b.scores[j] - b.threshold).abs() < tol;
        near || a.flags[i] == b.flags[j]
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(CASES))]

    #[test]
    fn threshold_never_increases((seed, rows, cols) in dims(), kind in 0u8..6) {
        let state = fit(&sample_matrix(seed, rows, cols, kind), &LadConfig::default()).unwrap();
        prop_assert_eq!(state.threshold_history[0], 0.95);
        prop_assert!(state.threshold_history.windows(2).all(|w| w[1] <= w[0]));
        prop_assert_eq!(*state.threshold_history.last().unwrap(), state.threshold);
    }

    #[test]
    fn scores_follow_row_permutations((seed, rows, cols) in dims(), perm_seed in any::<u64>()) {
        let data = sample_matrix(seed, rows, cols, 0);
        let mut perm: Vec<usize> = (0..rows).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(perm_seed);
        for i in (1..rows).rev() {
            perm.swap(i, rng.random_range(0..=i));
        }
        let permuted: Vec<Vec<f64>> = perm.iter().map(|&i| data.row(i).to_vec()).collect();
        let a = fit(&data, &LadConfig::default()).unwrap();
        let b = fit(&DataMatrix::from_rows(&permuted).unwrap(), &LadConfig::default()).unwrap();
        let pos: Vec<usize> = {
            let mut inv = vec![0; rows];
            for (k, &i) in perm.iter().enumerate() {
                inv[i] = k;
            }
            inv
        };
        for i in 0..rows {
            prop_assert!((a.scores[i] - b.scores[pos[i]]).abs() <= 1e-9);
        }
        prop_assert!(flags_agree(&a, &b, |i| pos[i], 1e-9));
    }

    #[test]
    fn positive_affine_columns_keep_ranks(
        (seed, rows, cols) in (any::<u64>(), 3usize..120, 1usize..12),
        scales in prop::collection::vec((0.01f64..100.0, -1e3f64..1e3), 12),
    ) {
        let data = sample_matrix(seed, rows, cols, 0);
        let moved: Vec<f64> = data
            .values()
            .iter()
            .enumerate()
            .map(|(k, &x)| {
                let (a, b) = scales[k % cols];
                a * x + b
            })
            .collect();
        // a lone reference row hits the absolute epsilon floor, which does not
        // rescale with the column, so keep at least two rows unflagged
        let cfg = LadConfig { min_unflagged_fraction: (2.0 / rows as f64).max(0.05), ..LadConfig::default() };
        let a = fit(&data, &cfg).unwrap();
        let b = fit(&DataMatrix::from_row_major(rows, cols, moved).unwrap(), &cfg).unwrap();
        let tol = 1e-8;
        for i in 0..rows {
            prop_assert!((a.scores[i] - b.scores[i]).abs() <= tol);
            for j in 0..rows {
                if a.scores[i] > a.scores[j] + 2.0 * tol {
                    prop_assert!(b.scores[i] > b.scores[j]);
                }
                if b.scores[i] > b.scores[j] + 2.0 * tol {
                    prop_assert!(a.scores[i] > a.scores[j]);
                }
            }
        }
        prop_assert!(flags_agree(&a, &b, |i| i, tol));
    }

    #[test]
    fn scores_stay_finite_in_unit_interval((seed, rows, cols) in dims(), kind in 0u8..6) {
        let state = fit(&sample_matrix(seed, rows, cols, kind), &LadConfig::default()).unwrap();
        prop_assert!(state.scores.iter().all(|s| s.is_finite() && (0.0..=1.0).contains(s)));
        prop_assert!(state.threshold.is_finite());
    }

    #[test]
    fn unflagged_subset_is_never_empty(
        (seed, rows, cols) in dims(),
        kind in 0u8..6,
        q in 0.05f64..0.99,
        frac in 0.01f64..0.9,
    ) {
        let cfg = LadConfig { quantile_level: q, min_unflagged_fraction: frac, ..LadConfig::default() };
        let state = fit(&sample_matrix(seed, rows, cols, kind), &cfg).unwrap();
        let unflagged = rows - state.flagged_count();
        prop_assert!(unflagged >= 1);
        prop_assert!(state.flagged_count() == 0 || unflagged as f64 >= frac * rows as f64);
    }

    #[test]
    fn trapezoid_auc_equals_pairwise(
        raw in prop::collection::vec((0u8..40, any::<bool>()), 2..200),
    ) {
        let scores: Vec<f64> = raw.iter().map(|(s, _)| *s as f64 / 7.0).collect();
        let truth: Vec<bool> = raw.iter().map(|(_, t)| *t).collect();
        prop_assume!(truth.iter().any(|&t| t) && truth.iter().any(|&t| !t));
        let mut wins = 0.0;
        let (mut pos, mut neg) = (0.0, 0.0);
        for (i, &ti) in truth.iter().enumerate() {
            if ti { pos += 1.0 } else { neg += 1.0 }
            for (j, &tj) in truth.iter().enumerate() {
                if ti && !tj {
                    wins += if scores[i] > scores[j] { 1.0 } else if scores[i] == scores[j] { 0.5 } else { 0.0 };
                }
            }
        }
        let auc = roc_auc(&scores, &truth).unwrap().auc;
        prop_assert!((auc - wins / (pos * neg)).abs() <= 1e-12);
        prop_assert!((auc - rank_auc(&scores, &truth).unwrap()).abs() <= 1e-12);
    }

    #[test]
    fn auc_ignores_increasing_transforms(
        raw in prop::collection::vec((0u8..60, any::<bool>()), 2..300),
        which in 0u8..3,
    ) {
        let scores: Vec<f64> = raw.iter().map(|(s, _)| *s as f64).collect();
        let truth: Vec<bool> = raw.iter().map(|(_, t)| *t).collect();
        prop_assume!(truth.iter().any(|&t| t) && truth.iter().any(|&t| !t));
        let moved: Vec<f64> = scores
            .iter()
            .map(|&x| match which {
                0 => (x / 7.0).exp(),
                1 => x * x * x - 40.0,
                _ => (1.0 + x).ln(),
            })
            .collect();
        prop_assert_eq!(roc_auc(&scores, &truth).unwrap().auc, roc_auc(&moved, &truth).unwrap().auc);
    }
}
