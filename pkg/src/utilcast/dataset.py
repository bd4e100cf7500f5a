"""Feature-matrix assembly, correlation pruning and row splits."""

from __future__ import annotations

import csv
import hashlib
import json
import os
from dataclasses import dataclass

import numpy as np

from .errors import SchemaError
from .trace_ingest import SUMMARY_FIELDS, generate_synthetic_trace, preprocess

DEFAULT_TARGET = "average_usage_cpu"
LEAKAGE_POLICIES = ("exclude-siblings", "none")

_DERIVED_SUFFIXES = ("_cpus", "_cpu", "_memory", "_freq") + tuple(f"_{s}" for s in SUMMARY_FIELDS)


def source_field(name):
    """Raw trace column a derived feature was parsed from."""
    for suffix in _DERIVED_SUFFIXES:
        if name.endswith(suffix) and len(name) > len(suffix):
            return name[: -len(suffix)]
    return name


def schema_fingerprint(names):
    """Hash of the ordered feature names."""
    return hashlib.sha256("\n".join(names).encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class FeatureMatrix:
    column_names: tuple
    values: np.ndarray
    target_name: str
    target: np.ndarray

    def __post_init__(self):
        names = tuple(self.column_names)
        object.__setattr__(self, "column_names", names)
        values = np.ascontiguousarray(self.values, dtype=float)
        target = np.ascontiguousarray(self.target, dtype=float)
        if values.ndim != 2 or values.shape[1] != len(names):
            raise SchemaError(f"values shape {values.shape} does not match {len(names)} column names")
        if target.shape != (values.shape[0],):
            raise SchemaError("target length does not match the number of rows")
        if len(set(names)) != len(names):
            raise SchemaError("duplicate column names")
        if self.target_name in names:
            raise SchemaError(f"target {self.target_name!r} is also a feature column")
        if np.isnan(values).any() or np.isnan(target).any():
            raise SchemaError("feature matrix contains missing values")
        values.setflags(write=False)
        target.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "target", target)

    @property
    def rows(self):
        return self.values.shape[0]

    @property
    def fingerprint(self):
        return schema_fingerprint(self.column_names)

    def take(self, indices):
        indices = np.asarray(indices, dtype=np.intp)
        return FeatureMatrix(self.column_names, self.values[indices], self.target_name, self.target[indices])

    def select(self, names):
        """Return the matrix restricted to (and reordered as) ``names``."""
        missing = [n for n in names if n not in self.column_names]
        if missing:
            raise SchemaError(f"columns missing from matrix: {', '.join(missing)}")
        pos = [self.column_names.index(n) for n in names]
        return FeatureMatrix(tuple(names), self.values[:, pos], self.target_name, self.target)

    def column(self, name):
        if name == self.target_name:
            return self.target
        if name not in self.column_names:
            raise SchemaError(f"no column named {name!r}")
        return self.values[:, self.column_names.index(name)]


@dataclass(frozen=True)
class SplitIndices:
    train: np.ndarray
    test: np.ndarray


@dataclass(frozen=True)
class FoldPlan:
    k: int
    folds: tuple

    def train_indices(self, i):
        return np.sort(np.concatenate([f for j, f in enumerate(self.folds) if j != i]))


def build_feature_matrix(records, target_name=DEFAULT_TARGET, leakage_policy="exclude-siblings"):
    """Assemble flat records into a :class:`FeatureMatrix`.

    Columns are ordered lexicographically. Under ``exclude-siblings`` every
    feature parsed from the same raw column as the target is left out.
    """
    if leakage_policy not in LEAKAGE_POLICIES:
        raise ValueError(f"unknown leakage policy {leakage_policy!r}")
    records = list(records)
    if not records:
        raise SchemaError("cannot build a feature matrix from zero rows")
    names = sorted(set().union(*records))
    if target_name not in names:
        raise SchemaError(f"target column {target_name!r} not found in records")
    excluded = {target_name}
    if leakage_policy == "exclude-siblings":
        src = source_field(target_name)
        excluded |= {n for n in names if source_field(n) == src}
    features = [n for n in names if n not in excluded]
    values = np.array([[r.get(n, 0.0) for n in features] for r in records], dtype=float)
    target = np.array([r[target_name] for r in records], dtype=float)
    return FeatureMatrix(tuple(features), values.reshape(len(records), len(features)), target_name, target)


def correlation_matrix(m):
    """Pearson correlations between the columns of ``m``.

    Constant columns have zero correlation with everything, themselves
    included. The result is exactly symmetric.
    """
    values = m.values if isinstance(m, FeatureMatrix) else np.asarray(m, dtype=float)
    if values.shape[0] < 2:
        raise ValueError("correlation needs at least two rows")
    cols = np.ascontiguousarray((values - values.mean(axis=0)).T)
    p = cols.shape[0]
    # one dot routine for every entry, so identical columns give exactly 1
    gram = np.empty((p, p))
    for i in range(p):
        for j in range(i, p):
            gram[i, j] = gram[j, i] = np.dot(cols[i], cols[j])
    sq = np.diag(gram).copy()
    constant = (values.max(axis=0) == values.min(axis=0)) | (sq == 0.0)
    with np.errstate(invalid="ignore", divide="ignore"):
        corr = gram / np.sqrt(np.outer(sq, sq))
    corr = np.clip(corr, -1.0, 1.0)
    corr[constant, :] = 0.0
    corr[:, constant] = 0.0
    np.fill_diagonal(corr, np.where(constant, 0.0, 1.0))
    return corr


def prune_correlated(m, threshold=0.95):
    """Greedy redundancy pruning in column order.

    A column is dropped when its absolute correlation with any already kept
    column exceeds ``threshold``.
    """
    if not 0.0 < threshold <= 1.0:
        raise ValueError("threshold must lie in (0, 1]")
    corr = np.abs(correlation_matrix(m))
    kept = []
    for j in range(corr.shape[0]):
        if all(corr[j, i] <= threshold for i in kept):
            kept.append(j)
    return m.select([m.column_names[j] for j in kept])


def train_test_split(m, test_fraction=0.2, seed=0):
    rows = m.rows if isinstance(m, FeatureMatrix) else int(m)
    if not 0.0 < test_fraction < 1.0:
        raise ValueError("test_fraction must lie strictly between 0 and 1")
    if rows < 2:
        raise ValueError("need at least two rows to split")
    n_test = min(max(int(round(rows * test_fraction)), 1), rows - 1)
    perm = np.random.default_rng(seed).permutation(rows)
    return SplitIndices(train=np.sort(perm[n_test:]), test=np.sort(perm[:n_test]))


def kfold_indices(rows, k=3, seed=0):
    """Shuffle rows, then cut into ``k`` contiguous folds (larger folds first)."""
    if k < 2:
        raise ValueError("k must be at least 2")
    if k > rows:
        raise ValueError(f"cannot make {k} folds from {rows} rows")
    perm = np.random.default_rng(seed).permutation(rows)
    return FoldPlan(k=k, folds=tuple(np.sort(f) for f in np.array_split(perm, k)))


@dataclass(frozen=True)
class Benchmark:
    train: FeatureMatrix
    test: FeatureMatrix
    test_full: FeatureMatrix


def synthetic_benchmark(n=5000, seed=7, test_fraction=0.2, prune_threshold=0.95):
    """The standard synthetic benchmark used by the tests and demos.

    Generates ``n`` jobs with ``seed``, preprocesses them, builds the matrix
    for the default target, splits it with the same seed, prunes redundant
    features on the training part and applies that schema to the test part.
    ``test_full`` keeps every test column (useful for binning by request).
    """
    matrix = build_feature_matrix(preprocess(generate_synthetic_trace(n, seed)).rows)
    split = train_test_split(matrix, test_fraction, seed)
    train = prune_correlated(matrix.take(split.train), prune_threshold)
    test_full = matrix.take(split.test)
    return Benchmark(train, test_full.select(train.column_names), test_full)


# --------------------------------------------------------------------------
# matrix files: CSV + JSON sidecar


def _meta_path(path):
    return os.fspath(path) + ".meta.json"


def write_matrix(m, path):
    path = os.fspath(path)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(list(m.column_names) + [m.target_name])
        for row, t in zip(m.values.tolist(), m.target.tolist()):
            writer.writerow([repr(v) for v in row] + [repr(t)])
    meta = {"target": m.target_name, "schema_fingerprint": m.fingerprint, "rows": m.rows}
    with open(_meta_path(path), "w", encoding="utf-8") as fh:
        json.dump(meta, fh, sort_keys=True, indent=1)
        fh.write("\n")


def read_matrix(path):
    path = os.fspath(path)
    if not os.path.isfile(path):
        raise FileNotFoundError(2, "no such matrix file", path)
    try:
        with open(_meta_path(path), "r", encoding="utf-8") as fh:
            meta = json.load(fh)
    except FileNotFoundError:
        raise SchemaError(f"{path}: missing metadata sidecar {_meta_path(path)}") from None
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(f"{path}: empty matrix file") from None
        data = [[float(x) for x in row] for row in reader if row]
    target_name = meta["target"]
    if target_name not in header:
        raise SchemaError(f"{path}: target column {target_name!r} missing from header")
    t = header.index(target_name)
    names = header[:t] + header[t + 1 :]
    arr = np.array(data, dtype=float).reshape(len(data), len(header))
    m = FeatureMatrix(tuple(names), np.delete(arr, t, axis=1), target_name, arr[:, t])
    if m.fingerprint != meta.get("schema_fingerprint"):
        raise SchemaError(f"{path}: schema fingerprint does not match the metadata sidecar")
    return m
