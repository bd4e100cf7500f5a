"""Randomized hyperparameter search with k-fold cross-validation."""

from __future__ import annotations

import itertools
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .dataset import FeatureMatrix, kfold_indices
from .evaluation import r2
from .forest import ForestConfig, _ensemble_mean, _fit_one, fit_forest, predict
from .tree import presort
from .errors import UtilcastError

PARAM_NAMES = ("n_estimators", "max_depth", "min_samples_split", "min_samples_leaf")


@dataclass(frozen=True)
class ParamGrid:
    n_estimators: tuple = (50, 100, 200, 400)
    max_depth: tuple = (None, 10, 20, 40)
    min_samples_split: tuple = (2, 5, 10)
    min_samples_leaf: tuple = (1, 2, 4)

    def axes(self):
        return [tuple(getattr(self, name)) for name in PARAM_NAMES]

    def combinations(self):
        """Every grid point, in row-major order over the four axes."""
        for axis, name in zip(self.axes(), PARAM_NAMES):
            if not axis:
                raise ValueError(f"grid axis {name!r} is empty")
        return [dict(zip(PARAM_NAMES, combo)) for combo in itertools.product(*self.axes())]

    def __len__(self):
        return int(np.prod([len(a) for a in self.axes()]))


@dataclass(frozen=True)
class Trial:
    config: ForestConfig
    fold_r2: tuple
    mean_r2: float


@dataclass(frozen=True)
class SearchResult:
    trials: tuple
    best: ForestConfig
    best_mean_r2: float
    fold_plan: object = field(repr=False, default=None)

    def to_dict(self):
        return {
            "best": self.best.to_dict(),
            "best_mean_r2": self.best_mean_r2,
            "trials": [
                {"config": t.config.to_dict(), "fold_r2": list(t.fold_r2), "mean_r2": t.mean_r2}
                for t in self.trials
            ],
            "folds": [f.tolist() for f in self.fold_plan.folds] if self.fold_plan else None,
        }


class TrialError(UtilcastError):
    def __init__(self, config, cause):
        super().__init__(f"training failed for {config}: {cause}")
        self.config = config


def sample_params(grid=None, n_samples=20, seed=0, base=None):
    """Draw ``n_samples`` distinct grid points uniformly without replacement.

    Asking for at least as many samples as the grid holds returns the whole
    grid in its natural order. ``base`` supplies the non-searched settings.
    """
    grid = ParamGrid() if grid is None else grid
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    combos = grid.combinations()
    base = base or ForestConfig()
    if n_samples >= len(combos):
        picked = combos
    else:
        idx = np.random.default_rng(seed).choice(len(combos), size=n_samples, replace=False)
        picked = [combos[i] for i in idx]
    return [replace(base, **p) for p in picked]


def cross_val_r2(X, y, config, plan, n_jobs=1):
    scores = []
    for i, fold in enumerate(plan.folds):
        train = plan.train_indices(i)
        model = fit_forest(X[train], y[train], config, n_jobs=n_jobs)
        scores.append(r2(y[fold], predict(model, X[fold])))
    return tuple(scores)


class _HeldOutCache:
    """Held-out predictions of individual fold trees, shared between trials.

    A tree depends only on its fold, its index and the tree parameters, so
    trials differing in ``n_estimators`` share a prefix of trees. A tree that
    stopped growing before reaching its depth limit is also the tree for
    every larger limit (or none), so those are shared too.
    """

    def __init__(self, X, y, plan, n_jobs=1):
        self.folds = []
        for i, fold in enumerate(plan.folds):
            train = plan.train_indices(i)
            Xtr = np.ascontiguousarray(X[train])
            self.folds.append((Xtr, y[train], presort(Xtr), np.ascontiguousarray(X[fold])))
        self.n_jobs = n_jobs
        self._store = {}

    def _lookup(self, key, limit):
        for cached_limit, depth, preds in self._store.get(key, ()):
            if cached_limit == limit:
                return preds
            natural = cached_limit is None or depth < cached_limit
            if natural and (limit is None or depth <= limit):
                return preds
        return None

    def _grow(self, fold, config, index):
        Xtr, ytr, order, Xte = self.folds[fold]
        tree = _fit_one(Xtr, ytr, order, config, index)
        return config.max_depth, tree.depth(), tree.predict(Xte)

    def per_tree(self, fold, config):
        shape = replace(config, n_estimators=1, max_depth=None)
        keys = [(fold, shape, i) for i in range(config.n_estimators)]
        preds = [self._lookup(key, config.max_depth) for key in keys]
        missing = [i for i, p in enumerate(preds) if p is None]
        if self.n_jobs > 1 and len(missing) > 1:
            with ThreadPoolExecutor(max_workers=self.n_jobs) as pool:
                grown = list(pool.map(lambda i: self._grow(fold, config, i), missing))
        else:
            grown = [self._grow(fold, config, i) for i in missing]
        for i, entry in zip(missing, grown):
            self._store.setdefault(keys[i], []).append(entry)
            preds[i] = entry[2]
        return np.vstack(preds)


def randomized_search(X, y=None, grid=None, n_samples=20, k=3, seed=0, n_jobs=1, base=None):
    """Score sampled forest configs by mean k-fold R²; return every trial.

    One fold plan, drawn from ``seed``, is shared by all trials. The best
    trial is the first one (in sampling order) with the highest mean R².
    Scores equal those of :func:`cross_val_r2`; trees common to several
    trials are grown once.
    """
    if isinstance(X, FeatureMatrix):
        y = X.target if y is None else y
        X = X.values
    X = np.ascontiguousarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if k < 2 or X.shape[0] < k:
        raise ValueError(f"need k >= 2 and at least k rows (k={k}, rows={X.shape[0]})")
    base = base or ForestConfig(seed=seed)
    configs = sample_params(grid, n_samples, seed, base)
    plan = kfold_indices(X.shape[0], k, seed)
    cache = _HeldOutCache(X, y, plan, n_jobs=n_jobs or 1)

    trials = []
    for config in configs:
        try:
            folds = tuple(
                r2(y[fold], _ensemble_mean(cache.per_tree(i, config)))
                for i, fold in enumerate(plan.folds)
            )
        except Exception as exc:
            raise TrialError(config, exc) from exc
        trials.append(Trial(config, folds, float(np.mean(folds))))
    best = max(range(len(trials)), key=lambda i: (trials[i].mean_r2, -i))
    return SearchResult(tuple(trials), trials[best].config, trials[best].mean_r2, plan)


def write_report(result, path):
    """JSON report: every trial, its fold scores, the fold plan and the winner."""
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(result.to_dict(), fh, sort_keys=True, indent=1)
        fh.write("\n")


def format_table(result):
    """Plain-text table of the trials, best first marked with ``*``."""
    lines = [
        f"{'':1} {'n_estimators':>12} {'max_depth':>9} {'split':>5} {'leaf':>4} {'mean_r2':>10}  fold_r2"
    ]
    for t in result.trials:
        c = t.config
        mark = "*" if c == result.best else " "
        depth = "None" if c.max_depth is None else str(c.max_depth)
        folds = " ".join(f"{s:.4f}" for s in t.fold_r2)
        lines.append(
            f"{mark} {c.n_estimators:>12} {depth:>9} {c.min_samples_split:>5} "
            f"{c.min_samples_leaf:>4} {t.mean_r2:>10.5f}  {folds}"
        )
    return "\n".join(lines)
