"""Smoke test for the `lad` extension module.

Build and install first, e.g. `maturin develop -m crates/python/Cargo.toml`.
"""

import math
import os
import random
import sys
import tempfile

import lad


def gaussian_rows(rng, rows, cols):
    return [[rng.gauss(0.0, 1.0) for _ in range(cols)] for _ in range(rows)]


def main():
    rng = random.Random(0)

    assert lad.rate_eval(2.0) == 2.0
    per_dim, combined = lad.raw_score([3.0, 4.0], 2)
    assert per_dim == [2.25, 4.0] and combined == 4.0
    assert lad.quantile([1.0, 2.0, 3.0, 4.0], 0.5) == 2.5

    rows = gaussian_rows(rng, 200, 4)
    outliers = [5, 50, 120]
    for i in outliers:
        rows[i][1] += 8.0
    cfg = lad.LadConfig(n_iter=5)
    state = lad.fit(rows, cfg)
    assert len(state) == 200
    assert all(0.0 <= s <= 1.0 for s in state.scores)
    assert all(state.flags[i] for i in outliers), state
    assert sorted(lad.rank(state, 3)) == outliers
    history = state.threshold_history
    assert all(b <= a for a, b in zip(history, history[1:]))

    z = lad.standardize(rows, [False] * 200)
    col = [r[0] for r in z]
    assert abs(sum(col) / len(col)) < 1e-12
    assert len(lad.score_pass(rows, state.flags)) == 200

    truth = [i in outliers for i in range(200)]
    roc = lad.roc_auc(state.scores, truth)
    assert roc.auc == 1.0 and roc.points[0] == (0.0, 0.0)
    assert sum(lad.top_k_labels(state.scores, 3)) == 3

    prng = random.Random(1)
    panel = [[[10.0 * t + prng.gauss(0, 1), 2.0 * t + prng.gauss(0, 1)] for t in range(12)] for _ in range(30)]
    for t in range(6, 12):
        panel[4][t][0] += 30.0
    step = lad.one_time_step_mode(panel)
    full = lad.full_history_mode(panel)
    assert step.ranking()[0] == 4
    assert all(step.flags[4][6:]) and all(full.flags[4][6:])
    assert 4 in full.ranking()[:3]
    assert len(step.scores) == 30 and len(step.scores[0]) == 12
    windowed = lad.run(panel, window=2, threshold_carry="carry")
    assert all(windowed.flags[4][6:])
    late = lad.run(panel, window=None, start_offsets=[3] + [0] * 29)
    assert not any(late.flags[0][:3])

    try:
        lad.LadConfig(quantile_level=1.5)
    except ValueError:
        pass
    else:
        raise AssertionError("invalid config accepted")
    try:
        lad.standardize([[1.0], [2.0]], [True, True])
    except lad.StateError:
        pass
    else:
        raise AssertionError("empty reference subset accepted")

    with tempfile.TemporaryDirectory() as tmp:
        path = os.path.join(tmp, "m.csv")
        with open(path, "w") as f:
            f.write("a,b,label\n1,2,0\n3,4,1\n5,6,0\n")
        data, labels = lad.load_matrix(path, label_column="label")
        assert data == [[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]]
        assert labels == [False, True, False]

    assert not any(math.isnan(s) for s in state.scores)
    print("lad smoke test passed")
    return 0


if __name__ == "__main__":
    sys.exit(main())
