"""Random forest regression built on :mod:`utilcast.tree`.

Each tree sees a with-replacement bootstrap of the training rows and its own
random stream derived from ``(seed, tree_index)``, so the fitted forest does
not depend on how many threads grew it.
"""

from __future__ import annotations

import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .dataset import FeatureMatrix, schema_fingerprint
from .errors import ModelFormatError, SchemaError, UnsupportedVersionError
from .tree import Tree, grow_tree, presort, resolve_max_features

FORMAT_NAME = "utilcast-model"
FORMAT_VERSION = 1
CONFIDENCE_EPS = 1e-9


@dataclass(frozen=True)
class ForestConfig:
    n_estimators: int = 100
    max_depth: int | None = None
    min_samples_split: int = 2
    min_samples_leaf: int = 1
    max_features: object = None
    bootstrap_size: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.n_estimators < 1:
            raise ValueError("n_estimators must be >= 1")
        if self.max_depth is not None and self.max_depth < 0:
            raise ValueError("max_depth must be >= 0 or None")
        if self.min_samples_split < 2:
            raise ValueError("min_samples_split must be >= 2")
        if self.min_samples_leaf < 1:
            raise ValueError("min_samples_leaf must be >= 1")
        if not 0.0 < self.bootstrap_size <= 1.0:
            raise ValueError("bootstrap_size must lie in (0, 1]")
        resolve_max_features(self.max_features, 1)

    def tree_params(self):
        return dict(
            max_depth=self.max_depth,
            min_samples_split=self.min_samples_split,
            min_samples_leaf=self.min_samples_leaf,
            max_features=self.max_features,
        )

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        return cls(**{k: d[k] for k in cls.__dataclass_fields__ if k in d})


# Best configuration reported for the Borg subset.
TUNED_CONFIG = ForestConfig(n_estimators=100, max_depth=20, min_samples_split=10, min_samples_leaf=1)


@dataclass(frozen=True)
class RandomForestModel:
    trees: tuple
    config: ForestConfig
    feature_names: tuple
    importances: np.ndarray
    schema_fingerprint: str = field(default="")

    def __post_init__(self):
        object.__setattr__(self, "trees", tuple(self.trees))
        object.__setattr__(self, "feature_names", tuple(self.feature_names))
        if not self.schema_fingerprint:
            object.__setattr__(self, "schema_fingerprint", schema_fingerprint(self.feature_names))

    @property
    def n_features(self):
        return len(self.feature_names)


@dataclass(frozen=True)
class IntervalPrediction:
    point: float
    lo: float
    hi: float
    confidence: float


def tree_rng(seed, tree_index):
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(tree_index)]))


def fit_tree(X, y, config=None, rng=None):
    """Grow a single tree on all rows (no bootstrap).

    ``rng`` only matters when ``config.max_features`` restricts the features
    tried per split.
    """
    config = config or ForestConfig(n_estimators=1)
    rng = rng if rng is not None else np.random.default_rng(config.seed)
    seed = int(rng.integers(0, 2**63))
    return grow_tree(X, y, seed=seed, **config.tree_params())


def _fit_one(X, y, order, config, index):
    n = X.shape[0]
    rng = tree_rng(config.seed, index)
    size = max(1, int(round(config.bootstrap_size * n)))
    weights = np.bincount(rng.integers(0, n, size), minlength=n).astype(np.float64)
    seed = int(rng.integers(0, 2**63))
    return grow_tree(X, y, weights, seed=seed, order=order, **config.tree_params())


def _aggregate_importances(trees, n_features):
    total = np.zeros(n_features)
    for t in trees:
        total += t.importances(n_features)
    total /= len(trees)
    s = total.sum()
    return total / s if s > 0 else total


def fit_forest(X, y=None, config=None, feature_names=None, n_jobs=1):
    """Train a random forest.

    ``X`` may be a :class:`FeatureMatrix`, in which case ``y`` may be ``None``
    and the column names become the model schema.
    """
    config = config or ForestConfig()
    if isinstance(X, FeatureMatrix):
        feature_names = X.column_names
        y = X.target if y is None else y
        X = X.values
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] == 0:
        raise ValueError("X must be a non-empty 2-d array")
    if y.shape != (X.shape[0],):
        raise ValueError(f"X has {X.shape[0]} rows but y has shape {y.shape}")
    if feature_names is None:
        feature_names = tuple(f"x{i}" for i in range(X.shape[1]))
    if len(feature_names) != X.shape[1]:
        raise SchemaError(f"{len(feature_names)} feature names for {X.shape[1]} columns")
    order = presort(X)
    indices = range(config.n_estimators)
    if n_jobs and n_jobs > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            trees = list(pool.map(lambda i: _fit_one(X, y, order, config, i), indices))
    else:
        trees = [_fit_one(X, y, order, config, i) for i in indices]
    return RandomForestModel(
        trees=trees,
        config=config,
        feature_names=feature_names,
        importances=_aggregate_importances(trees, X.shape[1]),
    )


def _as_rows(model, X, feature_names=None):
    if isinstance(X, FeatureMatrix):
        X = X.select(model.feature_names).values if X.column_names != model.feature_names else X.values
    elif feature_names is not None and tuple(feature_names) != model.feature_names:
        raise SchemaError(
            f"feature schema mismatch: model expects {list(model.feature_names)}, "
            f"got {list(feature_names)}"
        )
    X = np.ascontiguousarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X.reshape(1, -1)
    if X.shape[1] != model.n_features:
        raise SchemaError(
            f"feature schema mismatch: model expects {model.n_features} features, got {X.shape[1]}"
        )
    return X


def tree_predictions(model, X, feature_names=None):
    """Per-tree predictions, shape ``(n_trees, n_rows)``."""
    X = _as_rows(model, X, feature_names)
    return np.vstack([t.predict(X) for t in model.trees])


def _ensemble_mean(per_tree):
    # clamp rounding so the mean never leaves the range of tree outputs
    return np.clip(per_tree.mean(axis=0), per_tree.min(axis=0), per_tree.max(axis=0))


def predict(model, X, feature_names=None):
    return _ensemble_mean(tree_predictions(model, X, feature_names))


def predict_point(model, x, feature_names=None):
    """Mean of the per-tree leaf values for one feature vector."""
    return float(predict(model, np.asarray(x, dtype=float).reshape(1, -1), feature_names)[0])


def _intervals(per_tree, alpha):
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie strictly between 0 and 1")
    point = _ensemble_mean(per_tree)
    lo, hi = np.quantile(per_tree, [alpha / 2.0, 1.0 - alpha / 2.0], axis=0, method="linear")
    # a skewed ensemble can put its mean outside the central quantiles
    lo = np.minimum(lo, point)
    hi = np.maximum(hi, point)
    spread = per_tree.std(axis=0)
    confidence = 1.0 - np.minimum(1.0, spread / (np.abs(point) + CONFIDENCE_EPS))
    return point, lo, hi, confidence


def predict_intervals(model, X, alpha=0.1, feature_names=None):
    """Vectorised :func:`predict_interval`; returns four arrays."""
    return _intervals(tree_predictions(model, X, feature_names), alpha)


def predict_interval(model, x, alpha=0.1, feature_names=None):
    """Point prediction, central ``1 - alpha`` ensemble interval and confidence.

    The interval bounds are linear-interpolation quantiles of the per-tree
    predictions, widened if needed so they always contain the point. The
    confidence is ``1 - min(1, s / (|point| + 1e-9))`` where ``s`` is the
    population standard deviation of the per-tree predictions.
    """
    per_tree = tree_predictions(model, np.asarray(x, dtype=float).reshape(1, -1), feature_names)
    point, lo, hi, conf = _intervals(per_tree, alpha)
    return IntervalPrediction(float(point[0]), float(lo[0]), float(hi[0]), float(conf[0]))


def feature_importances(model):
    """Normalised squared-error reduction per feature, averaged over trees."""
    return _aggregate_importances(model.trees, model.n_features)


def select_top_k(importances, feature_names=None, k=25):
    """Indices of the ``k`` largest importances; ties go to the lower index."""
    if k < 1:
        raise ValueError("k must be >= 1")
    importances = np.asarray(importances, dtype=float)
    order = sorted(range(len(importances)), key=lambda i: (-importances[i], i))
    return sorted(order[:k])


# --------------------------------------------------------------------------
# model files


def model_container(kind, feature_names, payload):
    return {
        "format": FORMAT_NAME,
        "version": FORMAT_VERSION,
        "kind": kind,
        "feature_names": list(feature_names),
        "schema_fingerprint": schema_fingerprint(feature_names),
        **payload,
    }


def forest_to_dict(model):
    return model_container(
        "forest",
        model.feature_names,
        {
            "config": model.config.to_dict(),
            "importances": model.importances.tolist(),
            "trees": [t.to_dict() for t in model.trees],
        },
    )


def dump_document(doc, sink):
    text = json.dumps(doc, sort_keys=True, separators=(",", ":")) + "\n"
    if isinstance(sink, (str, os.PathLike)):
        with open(sink, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sink.write(text)


def load_document(source):
    """Read and validate the shared model container; returns the raw dict."""
    if isinstance(source, (str, os.PathLike)):
        with open(source, "r", encoding="utf-8") as fh:
            text = fh.read()
    else:
        text = source.read()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelFormatError(f"model file is truncated or not valid JSON ({exc})") from exc
    if not isinstance(doc, dict) or doc.get("format") != FORMAT_NAME:
        raise ModelFormatError("not a utilcast model file")
    if doc.get("version") != FORMAT_VERSION:
        raise UnsupportedVersionError(
            f"unsupported model format version {doc.get('version')!r} (this build reads {FORMAT_VERSION})"
        )
    names = doc.get("feature_names")
    if not isinstance(names, list) or doc.get("schema_fingerprint") != schema_fingerprint(names):
        raise ModelFormatError("schema fingerprint does not match the stored feature names")
    return doc


def forest_from_dict(doc):
    try:
        trees = [Tree.from_dict(t) for t in doc["trees"]]
        model = RandomForestModel(
            trees=trees,
            config=ForestConfig.from_dict(doc["config"]),
            feature_names=doc["feature_names"],
            importances=np.asarray(doc["importances"], dtype=float),
            schema_fingerprint=doc["schema_fingerprint"],
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ModelFormatError(f"malformed forest model: {exc}") from exc
    if not trees or model.importances.shape != (model.n_features,):
        raise ModelFormatError("malformed forest model: missing trees or importances")
    return model


def save_model(model, sink):
    dump_document(forest_to_dict(model), sink)


def load_model(source):
    doc = load_document(source)
    if doc.get("kind") != "forest":
        raise ModelFormatError(f"expected a forest model, found kind {doc.get('kind')!r}")
    return forest_from_dict(doc)
