import json

import numpy as np
import pytest

from utilcast.dataset import kfold_indices
from utilcast.evaluation import r2
from utilcast.forest import ForestConfig, fit_forest, predict
from utilcast.tuning import (
    ParamGrid,
    TrialError,
    cross_val_r2,
    format_table,
    randomized_search,
    sample_params,
    write_report,
)

DEFAULT = ParamGrid()


def _data(n=90, seed=0):
    rng = np.random.default_rng(seed)
    X = rng.random((n, 3))
    y = np.sin(5 * X[:, 0]) + X[:, 1] + 0.05 * rng.standard_normal(n)
    return X, y


def test_default_grid_is_the_documented_grid():
    assert DEFAULT.n_estimators == (50, 100, 200, 400)
    assert DEFAULT.max_depth == (None, 10, 20, 40)
    assert DEFAULT.min_samples_split == (2, 5, 10)
    assert DEFAULT.min_samples_leaf == (1, 2, 4)
    assert len(DEFAULT) == 144


def test_sample_membership_and_distinctness():
    configs = sample_params(DEFAULT, 20, seed=3)
    assert len(configs) == 20
    keys = {(c.n_estimators, c.max_depth, c.min_samples_split, c.min_samples_leaf) for c in configs}
    assert len(keys) == 20
    for c in configs:
        assert c.n_estimators in DEFAULT.n_estimators and c.max_depth in DEFAULT.max_depth
        assert c.min_samples_split in DEFAULT.min_samples_split
        assert c.min_samples_leaf in DEFAULT.min_samples_leaf


def test_sample_exhaustion_and_determinism():
    assert len(sample_params(DEFAULT, 200, seed=1)) == 144
    assert sample_params(DEFAULT, 20, seed=3) == sample_params(DEFAULT, 20, seed=3)
    assert sample_params(DEFAULT, 20, seed=3) != sample_params(DEFAULT, 20, seed=4)


def test_sample_errors():
    with pytest.raises(ValueError):
        sample_params(ParamGrid(max_depth=()), 5)
    with pytest.raises(ValueError):
        sample_params(DEFAULT, 0)


def test_single_config_grid_is_best():
    X, y = _data()
    grid = ParamGrid((5,), (3,), (2,), (1,))
    result = randomized_search(X, y, grid, n_samples=20, k=3, seed=1)
    assert len(result.trials) == 1
    assert (result.best.n_estimators, result.best.max_depth) == (5, 3)


def test_cached_scores_equal_direct_cross_validation():
    X, y = _data()
    grid = ParamGrid((3, 6), (None, 2, 4), (2, 10), (1, 4))
    result = randomized_search(X, y, grid, n_samples=24, k=3, seed=2)
    plan = kfold_indices(len(y), 3, 2)
    for trial in result.trials:
        assert trial.fold_r2 == cross_val_r2(X, y, trial.config, plan)
        assert trial.mean_r2 == float(np.mean(trial.fold_r2))


def test_best_is_maximal_and_first_among_ties():
    X, y = _data()
    grid = ParamGrid((2, 4), (None, 3), (2,), (1, 2))
    result = randomized_search(X, y, grid, n_samples=8, k=3, seed=5)
    scores = [t.mean_r2 for t in result.trials]
    assert result.best_mean_r2 == max(scores)
    assert result.best == result.trials[scores.index(max(scores))].config


def test_thread_count_does_not_change_scores():
    X, y = _data()
    grid = ParamGrid((3, 5), (None, 3), (2,), (1,))
    a = randomized_search(X, y, grid, n_samples=4, k=3, seed=6, n_jobs=1)
    b = randomized_search(X, y, grid, n_samples=4, k=3, seed=6, n_jobs=3)
    assert a.trials == b.trials


def test_fold_plan_is_saved_and_shared(tmp_path):
    X, y = _data()
    grid = ParamGrid((3,), (None, 2), (2,), (1,))
    result = randomized_search(X, y, grid, n_samples=2, k=3, seed=7)
    path = tmp_path / "report.json"
    write_report(result, path)
    doc = json.loads(path.read_text())
    folds = [np.array(f) for f in doc["folds"]]
    assert sorted(np.concatenate(folds).tolist()) == list(range(len(y)))
    # per-fold scores are recomputable from the saved plan
    for t in doc["trials"]:
        config = ForestConfig.from_dict(t["config"])
        scores = []
        for i, fold in enumerate(folds):
            train = np.concatenate([f for j, f in enumerate(folds) if j != i])
            model = fit_forest(X[np.sort(train)], y[np.sort(train)], config)
            scores.append(r2(y[fold], predict(model, X[fold])))
        assert scores == t["fold_r2"]


def test_search_validation():
    X, y = _data(5)
    with pytest.raises(ValueError):
        randomized_search(X, y, k=1)
    with pytest.raises(ValueError):
        randomized_search(X[:2], y[:2], k=3)


def test_training_failure_names_config(monkeypatch):
    import utilcast.tuning as tuning

    def broken(*args):
        raise RuntimeError("boom")

    monkeypatch.setattr(tuning, "_fit_one", broken)
    X, y = _data()
    with pytest.raises(TrialError, match="n_estimators=2.*boom") as err:
        randomized_search(X, y, ParamGrid((2,), (None,), (2,), (1,)), n_samples=1, k=3)
    assert err.value.config.n_estimators == 2


def test_format_table_marks_best():
    X, y = _data()
    result = randomized_search(X, y, ParamGrid((2, 3), (2,), (2,), (1,)), n_samples=2, k=3, seed=0)
    lines = format_table(result).splitlines()
    assert len(lines) == 3
    assert sum(line.startswith("*") for line in lines) == 1
