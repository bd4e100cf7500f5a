"""CART regression trees grown by squared-error reduction.

Trees are stored as flat parallel arrays (the node at index ``i`` is a leaf
when ``feature[i] == -1``). Growth runs in a numba kernel that releases the
GIL, so several trees can be grown from threads at once.

The kernel works on per-row integer weights rather than duplicated rows: a
bootstrap sample is passed as the multiplicity of each original row. Every
feature column is argsorted once per dataset; each node then owns the same
``[start, end)`` slice of every presorted list, and a split stably partitions
those slices, so no node ever re-sorts.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

LEAF = -1
UNBOUNDED = -1
TIE_TOLERANCE = 1e-12

@njit(cache=True, nogil=True)
def _splitmix64(state):
    state[0] = state[0] + np.uint64(0x9E3779B97F4A7C15)
    z = state[0]
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return z ^ (z >> np.uint64(31))


@njit(cache=True, nogil=True)
def _draw_features(p, k, state, pool, out):
    # partial Fisher-Yates; result sorted so ties resolve to the lowest index
    for i in range(p):
        pool[i] = i
    for i in range(k):
        j = i + np.int64(_splitmix64(state) % np.uint64(p - i))
        tmp = pool[i]
        pool[i] = pool[j]
        pool[j] = tmp
    for i in range(k):
        out[i] = pool[i]
    out[:k].sort()


@njit(cache=True, nogil=True)
def _grow(XT, y, w, order, max_depth, min_split, min_leaf, max_features, seed):
    p, n = XT.shape

    m = 0
    for r in range(n):
        if w[r] > 0:
            m += 1
    # Two buffers; a node at depth d reads buffer d % 2 and its split writes
    # the children into the other one. Lists 0..p-1 hold the node's rows
    # sorted by that feature (with the values alongside), list p holds them
    # in row order.
    idx = np.empty((2, p + 1, m), dtype=np.int32)
    xs = np.empty((2, p, m), dtype=np.float64)
    for f in range(p):
        c = 0
        for k in range(n):
            r = order[f, k]
            if w[r] > 0:
                idx[0, f, c] = r
                xs[0, f, c] = XT[f, r]
                c += 1
    c = 0
    for r in range(n):
        if w[r] > 0:
            idx[0, p, c] = r
            c += 1

    cap = 2 * m + 1
    feature = np.full(cap, -1, dtype=np.int64)
    threshold = np.zeros(cap, dtype=np.float64)
    left = np.full(cap, -1, dtype=np.int64)
    right = np.full(cap, -1, dtype=np.int64)
    value = np.zeros(cap, dtype=np.float64)
    weight = np.zeros(cap, dtype=np.float64)
    reduction = np.zeros(cap, dtype=np.float64)

    stack_start = np.empty(cap, dtype=np.int64)
    stack_end = np.empty(cap, dtype=np.int64)
    stack_depth = np.empty(cap, dtype=np.int64)
    stack_node = np.empty(cap, dtype=np.int64)
    goes_left = np.zeros(n, dtype=np.int64)
    pool = np.empty(p, dtype=np.int64)
    cand = np.empty(p, dtype=np.int64)
    state = np.empty(1, dtype=np.uint64)
    state[0] = seed
    k_feat = max_features if 0 < max_features < p else p

    n_nodes = 1
    top = 0
    stack_start[0] = 0
    stack_end[0] = m
    stack_depth[0] = 0
    stack_node[0] = 0

    while top >= 0:
        s = stack_start[top]
        e = stack_end[top]
        depth = stack_depth[top]
        node = stack_node[top]
        top -= 1
        cur = depth % 2
        rows = idx[cur, p]

        W = 0.0
        S = 0.0
        ymin = np.inf
        ymax = -np.inf
        for k in range(s, e):
            r = rows[k]
            W += w[r]
            S += w[r] * y[r]
            if y[r] < ymin:
                ymin = y[r]
            if y[r] > ymax:
                ymax = y[r]
        mean = S / W
        if ymin == ymax:
            mean = ymin
        elif mean < ymin:
            mean = ymin
        elif mean > ymax:
            mean = ymax
        value[node] = mean
        weight[node] = W

        if (
            ymin == ymax
            or (max_depth >= 0 and depth >= max_depth)
            or W < min_split
            or W < 2.0 * min_leaf
        ):
            continue

        Sc = 0.0
        Q = 0.0
        for k in range(s, e):
            r = rows[k]
            d = y[r] - mean
            Sc += w[r] * d
            Q += w[r] * d * d
        # gains closer than this are ties; rounding must not break them
        tie = TIE_TOLERANCE * Q

        if k_feat < p:
            _draw_features(p, k_feat, state, pool, cand)
        else:
            for f in range(p):
                cand[f] = f

        best_gain = -1.0
        best_f = -1
        best_pos = -1
        best_thr = 0.0
        best_wl = 0.0
        for ci in range(k_feat):
            f = cand[ci]
            ix = idx[cur, f]
            xf = xs[cur, f]
            wl = 0.0
            sl = 0.0
            for k in range(s, e - 1):
                r = ix[k]
                wl += w[r]
                sl += w[r] * (y[r] - mean)
                wr = W - wl
                if wr < min_leaf:
                    break
                sr = Sc - sl
                gain = (sl * sl * wr + sr * sr * wl) / (wl * wr)
                if gain > best_gain + tie and xf[k + 1] > xf[k] and wl >= min_leaf:
                    best_gain = gain
                    best_f = f
                    best_pos = k
                    best_wl = wl
                    thr = (xf[k] + xf[k + 1]) / 2.0
                    if thr >= xf[k + 1]:
                        thr = xf[k]
                    best_thr = thr

        if best_f < 0:
            continue
        red = best_gain - Sc * Sc / W
        if not red > 0.0:
            continue

        nxt = 1 - cur
        ixb = idx[cur, best_f]
        for k in range(s, best_pos + 1):
            goes_left[ixb[k]] = 1
        mid = best_pos + 1
        # feature lists only matter if a child can split again
        child_splittable = (max_depth < 0 or depth + 1 < max_depth) and max(
            best_wl, W - best_wl
        ) >= max(min_split, 2.0 * min_leaf)
        n_lists = p + 1 if child_splittable else 0
        for f in range(n_lists):
            src = idx[cur, f]
            dst = idx[nxt, f]
            if f < p:
                xsrc = xs[cur, f]
                xdst = xs[nxt, f]
            a = s
            b = mid
            for k in range(s, e):
                r = src[k]
                g = goes_left[r]
                pos = g * a + (1 - g) * b
                dst[pos] = r
                if f < p:
                    xdst[pos] = xsrc[k]
                a += g
                b += 1 - g
        if not child_splittable:
            src = idx[cur, p]
            dst = idx[nxt, p]
            a = s
            b = mid
            for k in range(s, e):
                r = src[k]
                g = goes_left[r]
                dst[g * a + (1 - g) * b] = r
                a += g
                b += 1 - g
        for k in range(s, mid):
            goes_left[ixb[k]] = 0

        lc = n_nodes
        rc = n_nodes + 1
        n_nodes += 2
        feature[node] = best_f
        threshold[node] = best_thr
        left[node] = lc
        right[node] = rc
        reduction[node] = red

        top += 1
        stack_start[top] = mid
        stack_end[top] = e
        stack_depth[top] = depth + 1
        stack_node[top] = rc
        top += 1
        stack_start[top] = s
        stack_end[top] = mid
        stack_depth[top] = depth + 1
        stack_node[top] = lc

    return (
        feature[:n_nodes].copy(),
        threshold[:n_nodes].copy(),
        left[:n_nodes].copy(),
        right[:n_nodes].copy(),
        value[:n_nodes].copy(),
        weight[:n_nodes].copy(),
        reduction[:n_nodes].copy(),
    )


@njit(cache=True, nogil=True)
def _depth(left, right):
    best = 0
    nodes = np.empty(left.shape[0], dtype=np.int64)
    depths = np.empty(left.shape[0], dtype=np.int64)
    nodes[0] = 0
    depths[0] = 0
    top = 0
    while top >= 0:
        node = nodes[top]
        d = depths[top]
        top -= 1
        if left[node] < 0:
            if d > best:
                best = d
            continue
        nodes[top + 1] = left[node]
        depths[top + 1] = d + 1
        nodes[top + 2] = right[node]
        depths[top + 2] = d + 1
        top += 2
    return best


@njit(cache=True, nogil=True)
def _apply(feature, threshold, left, right, value, X):
    out = np.empty(X.shape[0], dtype=np.float64)
    for i in range(X.shape[0]):
        node = 0
        while feature[node] >= 0:
            if X[i, feature[node]] <= threshold[node]:
                node = left[node]
            else:
                node = right[node]
        out[i] = value[node]
    return out


@dataclass(frozen=True)
class Tree:
    """A fitted regression tree in flat-array form.

    ``n_samples`` holds the (bootstrap-weighted) number of training rows that
    reached each node; ``reduction`` the squared-error reduction achieved by
    the split at each internal node (zero at leaves).
    """

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    n_samples: np.ndarray
    reduction: np.ndarray

    @classmethod
    def constant(cls, value, n_samples=1.0):
        """A single-leaf tree that always predicts ``value``."""
        return cls(
            feature=np.array([LEAF], dtype=np.int64),
            threshold=np.zeros(1),
            left=np.array([-1], dtype=np.int64),
            right=np.array([-1], dtype=np.int64),
            value=np.array([float(value)]),
            n_samples=np.array([float(n_samples)]),
            reduction=np.zeros(1),
        )

    @property
    def node_count(self):
        return len(self.feature)

    @property
    def is_leaf(self):
        return self.feature == LEAF

    def depth(self):
        return int(_depth(self.left, self.right))

    def predict(self, X):
        X = np.ascontiguousarray(X, dtype=np.float64)
        if X.ndim == 1:
            X = X.reshape(1, -1)
        return _apply(self.feature, self.threshold, self.left, self.right, self.value, X)

    def importances(self, n_features):
        """Raw squared-error reduction credited to each feature."""
        out = np.zeros(n_features)
        internal = self.feature != LEAF
        np.add.at(out, self.feature[internal], self.reduction[internal])
        return out

    def to_nested(self, node=0):
        """Nested-dict view, handy for inspection and structural comparisons."""
        if self.feature[node] == LEAF:
            return {"value": float(self.value[node]), "n_samples": float(self.n_samples[node])}
        return {
            "feature": int(self.feature[node]),
            "threshold": float(self.threshold[node]),
            "left": self.to_nested(self.left[node]),
            "right": self.to_nested(self.right[node]),
        }

    def to_dict(self):
        return {
            "feature": self.feature.tolist(),
            "threshold": self.threshold.tolist(),
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "value": self.value.tolist(),
            "n_samples": self.n_samples.tolist(),
            "reduction": self.reduction.tolist(),
        }

    @classmethod
    def from_dict(cls, d):
        ints = ("feature", "left", "right")
        arrays = {k: np.asarray(d[k], dtype=np.int64 if k in ints else np.float64) for k in cls.__dataclass_fields__}
        n = len(arrays["feature"])
        if n == 0 or any(len(a) != n for a in arrays.values()):
            raise ValueError("tree arrays are empty or have inconsistent lengths")
        internal = arrays["feature"] != LEAF
        parents = np.flatnonzero(internal)
        for k in ("left", "right"):
            child = arrays[k][internal]
            # children always follow their parent, which also rules out cycles
            if child.size and (child.max() >= n or (child <= parents).any()):
                raise ValueError("tree child index out of range")
        return cls(**arrays)


def presort(X):
    """Stable argsort of every column, shape ``(n_features, n_rows)``."""
    return np.ascontiguousarray(np.argsort(X, axis=0, kind="stable").T.astype(np.int64))


def resolve_max_features(rule, n_features):
    """Number of candidate features per split for a ``max_features`` rule.

    ``None``/``"all"`` means every feature, a float in (0, 1] a fraction of
    the columns (at least one), an int a fixed count.
    """
    if rule is None or rule == "all":
        return n_features
    if isinstance(rule, float):
        if not 0.0 < rule <= 1.0:
            raise ValueError("max_features fraction must lie in (0, 1]")
        return max(1, int(rule * n_features))
    rule = int(rule)
    if rule < 1:
        raise ValueError("max_features count must be >= 1")
    return min(rule, n_features)


def grow_tree(
    X,
    y,
    weights=None,
    *,
    max_depth=None,
    min_samples_split=2,
    min_samples_leaf=1,
    max_features=None,
    seed=0,
    order=None,
):
    """Grow one tree on ``X``/``y``; ``weights`` are integer row multiplicities."""
    X = np.asarray(X, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] == 0:
        raise ValueError("X must be a non-empty 2-d array")
    if X.shape[0] != y.shape[0]:
        raise ValueError(f"X has {X.shape[0]} rows but y has {y.shape[0]}")
    if not np.all(np.isfinite(X)) or not np.all(np.isfinite(y)):
        raise ValueError("X and y must be finite")
    n, p = X.shape
    w = np.ones(n) if weights is None else np.ascontiguousarray(weights, dtype=np.float64)
    if w.shape != (n,) or (w < 0).any() or not (w > 0).any():
        raise ValueError("weights must be non-negative, one per row, not all zero")
    if order is None:
        order = presort(X)
    arrays = _grow(
        np.ascontiguousarray(X.T),
        y,
        w,
        order,
        UNBOUNDED if max_depth is None else int(max_depth),
        float(min_samples_split),
        float(min_samples_leaf),
        resolve_max_features(max_features, p),
        np.uint64(int(seed) & 0xFFFFFFFFFFFFFFFF),
    )
    return Tree(*arrays)
