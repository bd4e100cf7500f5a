"""Provisioning advice, under-provisioning alerts and savings estimates."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dataset import FeatureMatrix
from .forest import IntervalPrediction, predict_intervals

# Slack when rounding up, so 10.000000000000002 CPUs still rounds to 10.
ROUNDING_SLACK = 1e-9


@dataclass(frozen=True)
class AdvicePolicy:
    alpha: float = 0.1
    headroom: float = 0.0
    risk_tolerance: float = 0.1
    granularity: float = 1.0

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise ValueError("alpha must lie strictly between 0 and 1")
        if not self.headroom >= 0.0:
            raise ValueError("headroom must be >= 0")
        if not self.risk_tolerance >= 0.0:
            raise ValueError("risk_tolerance must be >= 0")
        if not self.granularity > 0.0 or math.isinf(self.granularity):
            raise ValueError("granularity must be a positive finite number")


@dataclass(frozen=True)
class Advice:
    requested: float
    predicted: IntervalPrediction
    recommended: float
    risk_flag: bool
    rationale: str


@dataclass(frozen=True)
class CostEstimate:
    cluster_units: float
    reduction_fraction: float
    saved_units: float


@dataclass(frozen=True)
class BatchSummary:
    n: int
    total_requested: float
    total_recommended: float
    reduction_fraction: float
    risk_count: int


def round_up(value, granularity=1.0):
    """Smallest multiple of ``granularity`` not below ``value`` (with slack)."""
    steps = math.ceil(value / granularity - ROUNDING_SLACK)
    return steps * granularity


def _decide(requested, pred, policy):
    if not requested > 0:
        raise ValueError(f"requested must be > 0, got {requested}")
    limit = requested * (1.0 + policy.risk_tolerance)
    risk = pred.point > limit
    target = round_up(pred.hi * (1.0 + policy.headroom), policy.granularity)
    recommended = min(float(requested), float(target))
    if risk:
        why = (
            f"risk: predicted usage {pred.point:.6g} exceeds the request {requested:.6g} "
            f"by more than {policy.risk_tolerance:.0%}; keeping {recommended:.6g}"
        )
    elif target >= requested:
        why = f"cap: interval upper bound {pred.hi:.6g} reaches the request; keeping {requested:.6g}"
    else:
        why = (
            f"trim: interval [{pred.lo:.6g}, {pred.hi:.6g}] with {policy.headroom:.0%} headroom "
            f"rounds up to {recommended:.6g}"
        )
    return Advice(float(requested), pred, recommended, bool(risk), why)


def advise(model, features, requested, policy=None, feature_names=None):
    """Recommend an allocation for one job.

    The recommendation is the interval upper bound, inflated by the
    headroom and rounded up to the allocation granularity, never above the
    request. The risk flag fires when the point prediction exceeds the
    request by more than the risk tolerance.
    """
    policy = policy or AdvicePolicy()
    x = np.asarray(features, dtype=float).reshape(1, -1)
    point, lo, hi, conf = predict_intervals(model, x, policy.alpha, feature_names)
    pred = IntervalPrediction(float(point[0]), float(lo[0]), float(hi[0]), float(conf[0]))
    return _decide(requested, pred, policy)


def estimate_savings(cluster_units, reduction_fraction):
    """Units saved by trimming ``reduction_fraction`` of a cluster's allocation.

    >>> estimate_savings(10000, 0.10).saved_units
    1000.0
    """
    if not 0.0 <= reduction_fraction <= 1.0:
        raise ValueError(f"reduction fraction must lie in [0, 1], got {reduction_fraction}")
    if not cluster_units >= 0.0:
        raise ValueError(f"cluster units must be >= 0, got {cluster_units}")
    cluster_units = float(cluster_units)
    reduction_fraction = float(reduction_fraction)
    return CostEstimate(cluster_units, reduction_fraction, cluster_units * reduction_fraction)


def summarize(advice):
    total_req = math.fsum(a.requested for a in advice)
    total_rec = math.fsum(a.recommended for a in advice)
    return BatchSummary(
        n=len(advice),
        total_requested=total_req,
        total_recommended=total_rec,
        reduction_fraction=1.0 - total_rec / total_req,
        risk_count=sum(a.risk_flag for a in advice),
    )


def batch_advise(model, matrix, requested, policy=None, feature_names=None):
    """Advise every row of ``matrix``; returns ``(advice_list, summary)``.

    Errors on individual rows are re-raised with the row index.
    """
    policy = policy or AdvicePolicy()
    requested = np.asarray(requested, dtype=float).ravel()
    rows = matrix.rows if isinstance(matrix, FeatureMatrix) else len(matrix)
    if rows == 0:
        raise ValueError("cannot advise an empty matrix")
    if requested.size != rows:
        raise ValueError(f"{rows} rows but {requested.size} requested values")
    point, lo, hi, conf = predict_intervals(model, matrix, policy.alpha, feature_names)
    advice = []
    for i in range(rows):
        pred = IntervalPrediction(float(point[i]), float(lo[i]), float(hi[i]), float(conf[i]))
        try:
            advice.append(_decide(float(requested[i]), pred, policy))
        except ValueError as exc:
            raise ValueError(f"row {i}: {exc}") from exc
    return advice, summarize(advice)


def format_advice(advice, summary=None, ids=None):
    """One ``key=value`` record per job, then an optional summary block."""
    lines = []
    for i, a in enumerate(advice):
        job = ids[i] if ids is not None else i
        p = a.predicted
        lines.append(
            f"job={job} requested={a.requested!r} point={p.point!r} lo={p.lo!r} hi={p.hi!r} "
            f"confidence={p.confidence!r} recommended={a.recommended!r} "
            f"risk={'yes' if a.risk_flag else 'no'} rationale={a.rationale!r}"
        )
    if summary is not None:
        lines += [
            "[summary]",
            f"jobs={summary.n}",
            f"total_requested={summary.total_requested!r}",
            f"total_recommended={summary.total_recommended!r}",
            f"reduction_fraction={summary.reduction_fraction!r}",
            f"risk_count={summary.risk_count}",
        ]
    return "\n".join(lines)
