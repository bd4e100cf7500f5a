"""Linear regression and gradient-boosted-tree baselines."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .dataset import FeatureMatrix
from .errors import ModelFormatError, SchemaError
from .forest import dump_document, load_document, model_container
from .tree import Tree, grow_tree, presort

RIDGE = 1e-8


def _xy(X, y):
    if isinstance(X, FeatureMatrix):
        y = X.target if y is None else y
        X = X.values
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.ndim != 2 or X.shape[0] == 0:
        raise ValueError("X must be a non-empty 2-d array")
    if y.shape != (X.shape[0],):
        raise ValueError(f"X has {X.shape[0]} rows but y has shape {y.shape}")
    return X, y


def _rows(X, n_features):
    X = X.values if isinstance(X, FeatureMatrix) else np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X.reshape(1, -1)
    if X.shape[1] != n_features:
        raise SchemaError(f"model expects {n_features} features, got {X.shape[1]}")
    return X


@dataclass(frozen=True)
class LinearModel:
    coefficients: np.ndarray
    intercept: float
    feature_names: tuple = ()

    def predict(self, X):
        return _rows(X, len(self.coefficients)) @ self.coefficients + self.intercept


def fit_linear(X, y=None, feature_names=None):
    """Ordinary least squares with an intercept.

    Solved through the normal equations on centred data; when the Gram
    matrix is singular a ridge term of 1e-8 is added to its diagonal.
    """
    if isinstance(X, FeatureMatrix):
        feature_names = X.column_names
    X, y = _xy(X, y)
    x_mean = X.mean(axis=0)
    y_mean = y.mean()
    Xc = X - x_mean
    gram = Xc.T @ Xc
    rhs = Xc.T @ (y - y_mean)
    try:
        if np.linalg.cond(gram) > 1e12:
            raise np.linalg.LinAlgError("ill-conditioned")
        coef = np.linalg.solve(gram, rhs)
    except np.linalg.LinAlgError:
        coef = np.linalg.solve(gram + RIDGE * np.eye(gram.shape[0]), rhs)
    intercept = float(y_mean - x_mean @ coef)
    return LinearModel(coef, intercept, tuple(feature_names or ()))


@dataclass(frozen=True)
class GBTConfig:
    n_rounds: int = 100
    learning_rate: float = 0.1
    max_depth: int | None = 3

    def __post_init__(self):
        if self.n_rounds < 0:
            raise ValueError("n_rounds must be >= 0")
        if not 0.0 < self.learning_rate <= 1.0:
            raise ValueError("learning_rate must lie in (0, 1]")


@dataclass(frozen=True)
class GBTModel:
    initial: float
    trees: tuple
    learning_rate: float
    n_features: int
    config: GBTConfig = GBTConfig()
    feature_names: tuple = ()

    def predict(self, X):
        X = np.ascontiguousarray(_rows(X, self.n_features))
        out = np.full(X.shape[0], self.initial)
        for tree in self.trees:
            out += self.learning_rate * tree.predict(X)
        return out

    def staged_predict(self, X):
        X = np.ascontiguousarray(_rows(X, self.n_features))
        out = np.full(X.shape[0], self.initial)
        yield out.copy()
        for tree in self.trees:
            out += self.learning_rate * tree.predict(X)
            yield out.copy()


def fit_gbt(X, y=None, config=None, feature_names=None):
    """Stagewise least-squares boosting of depth-bounded regression trees."""
    config = config or GBTConfig()
    if isinstance(X, FeatureMatrix):
        feature_names = X.column_names
    X, y = _xy(X, y)
    X = np.ascontiguousarray(X)
    order = presort(X)
    initial = float(y.mean())
    pred = np.full(y.shape, initial)
    trees = []
    for _ in range(config.n_rounds):
        tree = grow_tree(X, y - pred, max_depth=config.max_depth, order=order)
        pred = pred + config.learning_rate * tree.predict(X)
        trees.append(tree)
    return GBTModel(initial, tuple(trees), config.learning_rate, X.shape[1], config, tuple(feature_names or ()))


# --------------------------------------------------------------------------
# model files, same container as the forest


def _names(model, n):
    return list(model.feature_names) or [f"x{i}" for i in range(n)]


def save_baseline(model, sink):
    if isinstance(model, LinearModel):
        doc = model_container(
            "linear",
            _names(model, len(model.coefficients)),
            {"coefficients": model.coefficients.tolist(), "intercept": model.intercept},
        )
    elif isinstance(model, GBTModel):
        doc = model_container(
            "gbt",
            _names(model, model.n_features),
            {
                "config": asdict(model.config),
                "initial": model.initial,
                "learning_rate": model.learning_rate,
                "trees": [t.to_dict() for t in model.trees],
            },
        )
    else:
        raise TypeError(f"not a baseline model: {type(model).__name__}")
    dump_document(doc, sink)


def baseline_from_dict(doc):
    names = tuple(doc["feature_names"])
    try:
        if doc["kind"] == "linear":
            return LinearModel(np.asarray(doc["coefficients"], dtype=float), float(doc["intercept"]), names)
        if doc["kind"] == "gbt":
            return GBTModel(
                initial=float(doc["initial"]),
                trees=tuple(Tree.from_dict(t) for t in doc["trees"]),
                learning_rate=float(doc["learning_rate"]),
                n_features=len(names),
                config=GBTConfig(**doc["config"]),
                feature_names=names,
            )
    except (KeyError, TypeError, ValueError) as exc:
        raise ModelFormatError(f"malformed {doc.get('kind')} model: {exc}") from exc
    raise ModelFormatError(f"not a baseline model kind: {doc.get('kind')!r}")


def load_baseline(source):
    return baseline_from_dict(load_document(source))
