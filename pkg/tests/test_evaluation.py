import csv
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from utilcast.evaluation import (
    DEFAULT_BIN_EDGES,
    error_by_bin,
    evaluate,
    export_report,
    mae,
    r2,
    read_metrics,
    residuals,
    rmse,
)


def test_metric_examples():
    y, p = [1.0, 2.0, 3.0], [1.0, 2.0, 4.0]
    assert mae(y, y) == 0.0 and rmse(y, y) == 0.0 and r2(y, y) == 1.0
    assert mae(y, p) == pytest.approx(1 / 3, abs=1e-15)
    assert rmse(y, p) == pytest.approx(0.5773502691896258, abs=1e-15)
    assert r2(y, p) == 0.5
    assert mae([0.0], [5.0]) == 5.0
    assert rmse([1.0, 2.0, 3.0], [3.0, 4.0, 5.0]) == 2.0


def test_metric_errors():
    for fn in (mae, rmse, r2, residuals):
        with pytest.raises(ValueError):
            fn([1.0, 2.0], [1.0])
        with pytest.raises(ValueError):
            fn([], [])


def test_r2_edge_rules():
    y = np.array([1.0, 4.0, 2.0, 8.0])
    assert r2(y, np.full(4, y.mean())) == 0.0
    assert r2([3.0, 3.0], [3.0, 3.0]) == 1.0
    assert r2([3.0, 3.0], [3.0, 4.0]) == 0.0


def test_residual_examples():
    assert residuals([1.0, 2.0], [2.0, 1.0]).tolist() == [1.0, -1.0]
    assert residuals([1.0, 2.0], [1.0, 2.0]).tolist() == [0.0, 0.0]


def test_residuals_of_unbiased_fit_centre_on_zero():
    rng = np.random.default_rng(0)
    y = rng.random(2000)
    pred = y + rng.normal(0, 0.1, 2000)
    res = residuals(y, pred)
    assert abs(res.mean()) <= 3 * res.std(ddof=1) / math.sqrt(res.size)


def test_metrics_match_brute_force_oracle():
    rng = np.random.default_rng(1)
    for _ in range(1000):
        n = int(rng.integers(1, 30))
        y = rng.normal(size=n)
        p = y + rng.normal(size=n) * rng.random()
        assert mae(y, p) == pytest.approx(oracles.mae(y.tolist(), p.tolist()), rel=1e-12, abs=1e-12)
        assert rmse(y, p) == pytest.approx(oracles.rmse(y.tolist(), p.tolist()), rel=1e-12, abs=1e-12)
        assert r2(y, p) == pytest.approx(oracles.r2(y.tolist(), p.tolist()), rel=1e-12, abs=1e-12)


@settings(max_examples=300, deadline=None)
@given(st.lists(st.tuples(st.floats(-1e6, 1e6), st.floats(-1e6, 1e6)), min_size=1, max_size=40))
def test_mae_never_exceeds_rmse(pairs):
    # values on a 1e-6 grid so squared errors cannot underflow to zero
    y = [round(a, 6) for a, _ in pairs]
    p = [round(b, 6) for _, b in pairs]
    # rounding in the two means can invert an exact tie by a few ulps
    assert mae(y, p) <= rmse(y, p) * (1 + 4 * np.finfo(float).eps)


def test_evaluate_bundles_metrics():
    rep = evaluate([1.0, 2.0, 3.0], [1.0, 2.0, 4.0])
    assert rep.n == 3 and rep.residuals.size == 3
    assert rep.parity_pairs.tolist() == [[1.0, 1.0], [2.0, 2.0], [3.0, 4.0]]
    assert rep.r2 == 0.5


def test_bin_examples():
    y = np.array([1.0, 2.0, 3.0, 4.0])
    p = np.array([1.5, 2.0, 2.0, 5.0])
    one = error_by_bin(y, p, [1.0, 2.0, 3.0, 4.0], edges=(0, 5))
    assert one.bins[0].count == 4 and one.bins[0].mae == mae(y, p)
    over = error_by_bin([1.0], [1.0], [50.0], DEFAULT_BIN_EDGES)
    assert over.overflow == 1 and sum(b.count for b in over.bins) == 0
    assert all(b.mae is None and b.rmse is None for b in over.bins)


def test_bin_hand_dataset():
    y = [1.0, 2.0, 3.0, 10.0, 20.0, 30.0]
    p = [2.0, 2.0, 5.0, 11.0, 17.0, 30.0]
    cpus = [1.0, 2.0, 4.0, 6.0, 7.0, 9.0]
    rep = error_by_bin(y, p, cpus)
    assert [b.count for b in rep.bins] == [3, 3, 0, 0]
    assert rep.bins[0].mae == pytest.approx(1.0)
    assert rep.bins[1].mae == pytest.approx(4 / 3)
    assert rep.bins[1].rmse == pytest.approx(math.sqrt(10 / 3))


def test_bin_edges_validation():
    for edges in ((0, 5, 5), (10, 5), (1,)):
        with pytest.raises(ValueError):
            error_by_bin([1.0], [1.0], [1.0], edges)


def test_bins_match_subset_oracle():
    rng = np.random.default_rng(2)
    for _ in range(200):
        n = int(rng.integers(1, 25))
        y, p = rng.random(n), rng.random(n)
        x = rng.random(n) * 60 - 5
        rep = error_by_bin(y, p, x)
        in_range = (x >= 0) & (x < 50)
        assert sum(b.count for b in rep.bins) == int(in_range.sum())
        assert rep.overflow == int((x >= 50).sum()) and rep.underflow == int((x < 0).sum())
        for b in rep.bins:
            idx = [i for i in range(n) if b.lo <= x[i] < b.hi]
            if idx:
                assert b.mae == pytest.approx(oracles.mae(y[idx].tolist(), p[idx].tolist()), abs=1e-12)
                assert b.rmse == pytest.approx(oracles.rmse(y[idx].tolist(), p[idx].tolist()), abs=1e-12)


def test_export_round_trip(tmp_path):
    rng = np.random.default_rng(3)
    y = rng.random(37)
    p = y + rng.normal(0, 0.05, 37)
    rep = evaluate(y, p)
    bins = error_by_bin(y, p, y * 40)
    corr = np.array([[1.0, 0.25], [0.25, 1.0]])
    paths = export_report(rep, bins, corr, tmp_path / "out", feature_names=("a", "b"))
    metrics = read_metrics(paths["metrics"])
    assert metrics["mae"] == rep.mae and metrics["rmse"] == rep.rmse and metrics["r2"] == rep.r2
    with open(paths["parity"]) as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["actual", "predicted"] and len(rows) - 1 == 37
    assert [float(v) for v in rows[1]] == [y[0], p[0]]
    with open(paths["bins"]) as fh:
        assert next(csv.reader(fh)) == ["bin_lo", "bin_hi", "count", "mae", "rmse"]
    with open(paths["correlation"]) as fh:
        grid = list(csv.reader(fh))
    assert grid[0] == ["feature", "a", "b"] and grid[2] == ["b", "0.25", "1.0"]


def test_export_refuses_empty_report(tmp_path):
    with pytest.raises(ValueError):
        export_report(None, None, None, tmp_path / "never")
    assert not (tmp_path / "never").exists()


def test_export_write_failure_names_path(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    with pytest.raises(OSError):
        export_report(evaluate([1.0], [1.0]), None, None, blocker)
