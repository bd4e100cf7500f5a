"""Regression metrics, residuals, error-by-bin tables and report export."""

from __future__ import annotations

import csv
import math
import os
from dataclasses import dataclass, field

import numpy as np

DEFAULT_BIN_EDGES = (0.0, 5.0, 10.0, 20.0, 50.0)


def _pair(actual, predicted):
    a = np.asarray(actual, dtype=float).ravel()
    p = np.asarray(predicted, dtype=float).ravel()
    if a.shape != p.shape:
        raise ValueError(f"length mismatch: {a.size} actual vs {p.size} predicted values")
    if a.size == 0:
        raise ValueError("metrics need at least one value")
    return a, p


def mae(actual, predicted):
    a, p = _pair(actual, predicted)
    return float(np.mean(np.abs(p - a)))


def rmse(actual, predicted):
    a, p = _pair(actual, predicted)
    return float(math.sqrt(np.mean((p - a) ** 2)))


def r2(actual, predicted):
    """Coefficient of determination.

    A constant ``actual`` has no variance to explain: the score is 1 for a
    perfect prediction and 0 otherwise.
    """
    a, p = _pair(actual, predicted)
    ss_res = float(np.sum((p - a) ** 2))
    ss_tot = float(np.sum((a - a.mean()) ** 2))
    if ss_tot == 0.0:
        return 1.0 if ss_res == 0.0 else 0.0
    return 1.0 - ss_res / ss_tot


def residuals(actual, predicted):
    """Predicted minus actual."""
    a, p = _pair(actual, predicted)
    return p - a


@dataclass(frozen=True)
class EvalReport:
    mae: float
    rmse: float
    r2: float
    residuals: np.ndarray
    parity_pairs: np.ndarray
    n: int


def evaluate(actual, predicted):
    a, p = _pair(actual, predicted)
    return EvalReport(
        mae=mae(a, p),
        rmse=rmse(a, p),
        r2=r2(a, p),
        residuals=residuals(a, p),
        parity_pairs=np.column_stack([a, p]),
        n=a.size,
    )


@dataclass(frozen=True)
class Bin:
    lo: float
    hi: float
    count: int
    mae: float | None
    rmse: float | None


@dataclass(frozen=True)
class BinReport:
    edges: tuple
    bins: tuple
    overflow: int = 0
    underflow: int = 0
    feature: str = field(default="")


def error_by_bin(actual, predicted, bin_feature, edges=DEFAULT_BIN_EDGES, feature_name=""):
    """Per-bin MAE/RMSE over half-open bins ``[e_i, e_{i+1})``.

    Rows at or above the last edge are counted in ``overflow``; rows below
    the first edge in ``underflow``. Empty bins report ``None`` metrics.
    """
    a, p = _pair(actual, predicted)
    x = np.asarray(bin_feature, dtype=float).ravel()
    if x.shape != a.shape:
        raise ValueError("bin feature must align with actual/predicted")
    edges = tuple(float(e) for e in edges)
    if len(edges) < 2 or any(b <= e for e, b in zip(edges, edges[1:])):
        raise ValueError(f"bin edges must be strictly increasing with >= 2 entries, got {edges}")
    bins = []
    for lo, hi in zip(edges, edges[1:]):
        mask = (x >= lo) & (x < hi)
        count = int(mask.sum())
        if count:
            bins.append(Bin(lo, hi, count, mae(a[mask], p[mask]), rmse(a[mask], p[mask])))
        else:
            bins.append(Bin(lo, hi, 0, None, None))
    return BinReport(
        edges=edges,
        bins=tuple(bins),
        overflow=int((x >= edges[-1]).sum()),
        underflow=int((x < edges[0]).sum()),
        feature=feature_name,
    )


# --------------------------------------------------------------------------
# export


def _r(v):
    return "" if v is None else repr(float(v))


def _write_csv(path, header, rows):
    try:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(header)
            writer.writerows(rows)
    except OSError as exc:
        raise OSError(f"cannot write report file {path}: {exc.strerror or exc}") from exc


def export_report(report, bin_report, correlation, sink, feature_names=None, extra_metrics=None):
    """Write the plot-ready report files into directory ``sink``.

    Files: ``metrics.csv``, ``parity.csv`` (actual,predicted),
    ``residuals.csv`` (actual,residual), ``bins.csv`` and, when a correlation
    grid is given, ``correlation.csv``. Returns the written paths.
    """
    if report is None or report.n == 0:
        raise ValueError("nothing to export: empty evaluation report")
    os.makedirs(sink, exist_ok=True)
    paths = {}
    metrics = [("mae", report.mae), ("rmse", report.rmse), ("r2", report.r2), ("n", report.n)]
    metrics += list((extra_metrics or {}).items())
    paths["metrics"] = os.path.join(sink, "metrics.csv")
    _write_csv(paths["metrics"], ["metric", "value"], [(k, repr(v)) for k, v in metrics])
    paths["parity"] = os.path.join(sink, "parity.csv")
    _write_csv(paths["parity"], ["actual", "predicted"], [(_r(a), _r(p)) for a, p in report.parity_pairs])
    paths["residuals"] = os.path.join(sink, "residuals.csv")
    _write_csv(
        paths["residuals"],
        ["actual", "residual"],
        [(_r(a), _r(r)) for a, r in zip(report.parity_pairs[:, 0], report.residuals)],
    )
    if bin_report is not None:
        paths["bins"] = os.path.join(sink, "bins.csv")
        rows = [(_r(b.lo), _r(b.hi), b.count, _r(b.mae), _r(b.rmse)) for b in bin_report.bins]
        rows.append((_r(bin_report.edges[-1]), "inf", bin_report.overflow, "", ""))
        _write_csv(paths["bins"], ["bin_lo", "bin_hi", "count", "mae", "rmse"], rows)
    if correlation is not None:
        corr = np.asarray(correlation, dtype=float)
        names = list(feature_names) if feature_names is not None else [f"x{i}" for i in range(corr.shape[0])]
        paths["correlation"] = os.path.join(sink, "correlation.csv")
        _write_csv(
            paths["correlation"],
            ["feature"] + names,
            [[name] + [_r(v) for v in row] for name, row in zip(names, corr)],
        )
    return paths


def read_metrics(path):
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        return {row["metric"]: float(row["value"]) for row in reader}
