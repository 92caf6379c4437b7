"""Weak learners: decision stumps and the weighted-LDA projected stump.

Stump training maximizes the signed-weight edge score(h) = sum_p c_p h(z_p)
over every dimension, threshold, and polarity.  Thresholds live at
midpoints of adjacent distinct sorted values plus -inf/+inf sentinels (the
constant classifiers), which covers all distinct labelings.  Ties break
deterministically by (lowest dim, lowest threshold, polarity +1 first) so
models are reproducible and a parallel dimension search would reduce to
the same answer.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import NumericError


@dataclass(frozen=True)
class Stump:
    """Axis-aligned threshold classifier: h(z) = polarity * sign(z[dim] - threshold).

    sign(0) = +1, so points exactly at the threshold land on the +polarity side.
    """

    dim: int
    threshold: float
    polarity: int

    def evaluate(self, points: np.ndarray) -> np.ndarray:
        z = points[:, self.dim]
        return np.where(z >= self.threshold, float(self.polarity), float(-self.polarity))


@dataclass(frozen=True)
class LinearStump:
    """Stump on a learned 1-D linear projection of a dimension subset."""

    dims: tuple
    direction: tuple
    threshold: float
    polarity: int

    def evaluate(self, points: np.ndarray) -> np.ndarray:
        z = points[:, np.asarray(self.dims, dtype=np.int64)] @ np.asarray(self.direction)
        return np.where(z >= self.threshold, float(self.polarity), float(-self.polarity))


@dataclass(frozen=True)
class SortedIndex:
    """Per-dimension permutations sorting each feature column ascending (stable)."""

    order: np.ndarray  # N x D, int32


@dataclass(frozen=True)
class WldaDirection:
    """Solution v of (Sigma1 + Sigma2 + ridge*I) v = mu1 - mu2 on weighted data."""

    direction: np.ndarray
    ridge: float


def build_sort_index(features: np.ndarray) -> SortedIndex:
    feats = np.asarray(features, dtype=np.float64)
    return SortedIndex(order=np.argsort(feats, axis=0, kind="stable").astype(np.int32))


def midpoint_threshold(left: float, right: float) -> float:
    """Midpoint of two adjacent distinct values, robust to rounding collapse.

    If the midpoint rounds onto the left value, fall back to the right value:
    the induced labeling (z >= theta on the + side) is unchanged.
    """
    mid = (left + right) / 2.0
    if mid <= left:
        return right
    return mid


class StumpSearch:
    """Reusable exhaustive stump search over a fixed point matrix.

    Holds the sorted index and scratch buffers so boosting loops pay the
    O(N log N) sort once and O(N*D) per weight vector afterwards.  The scan
    walks dimensions in blocks sized to keep the scratch in L2, so the pass
    stays cache-resident at any problem size.
    """

    # scratch elements per block; 32k doubles plus the int32 index rows is
    # about 384 KiB, inside a typical per-core L2
    _BLOCK_ELEMS = 32768

    def __init__(self, points: np.ndarray, idx: SortedIndex | None = None):
        self.points = np.ascontiguousarray(np.asarray(points, dtype=np.float64))
        n, d = self.points.shape
        self.idx = idx if idx is not None else build_sort_index(self.points)
        self._order_rows = np.ascontiguousarray(self.idx.order.T)
        block = max(1, min(d, self._BLOCK_ELEMS // max(n, 1)))
        self._block = block
        self._scratch = np.empty((block, n), dtype=np.float64)
        sorted_vals = np.take_along_axis(self.points, self.idx.order.astype(np.int64), axis=0)
        # Column j of a scratch row holds boundary p = j+1 (p points on the
        # left).  A boundary is searchable when it separates distinct values;
        # column N-1 (p = N, the +inf sentinel) duplicates a constant
        # classifier already covered by -inf, so it is suppressed too.
        invalid = np.ones((n, d), dtype=bool)
        if n > 1:
            invalid[: n - 1, :] = sorted_vals[:-1, :] == sorted_vals[1:, :]
        inv_dims, inv_cols = np.nonzero(invalid.T)
        self._inv_cols = inv_cols
        # block starts are multiples of the block width, so the local row of
        # an invalid entry is just dim mod block
        self._inv_local = inv_dims % block
        bounds = np.arange(0, d + block, block)[: -(-d // block) + 1]
        self._inv_starts = np.searchsorted(inv_dims, bounds)

    def best(self, c: np.ndarray) -> tuple[Stump, float]:
        c = np.asarray(c, dtype=np.float64)
        if not np.any(c != 0.0):
            raise NumericError("all stump-training weights are zero")
        n, d = self.points.shape
        total = float(np.sum(c))
        best_abs = -math.inf
        best_dim = -1
        best_p = -1
        for bi, j0 in enumerate(range(0, d, self._block)):
            rows = self._order_rows[j0:j0 + self._block]
            scr = self._scratch[: rows.shape[0]]
            np.take(c, rows, out=scr)
            np.cumsum(scr, axis=1, out=scr)
            # edge at boundary p with polarity +1 is total - 2 * prefix_p
            scr *= -2.0
            scr += total
            np.abs(scr, out=scr)
            lo, hi = self._inv_starts[bi], self._inv_starts[bi + 1]
            scr[self._inv_local[lo:hi], self._inv_cols[lo:hi]] = -1.0
            row_best = scr.max(axis=1)
            jloc = int(np.argmax(row_best))
            # strict comparison keeps the earliest dimension on ties
            if float(row_best[jloc]) > best_abs:
                best_abs = float(row_best[jloc])
                best_dim = j0 + jloc
                best_p = int(np.argmax(scr[jloc])) + 1
        if abs(total) >= best_abs:
            # Constant classifier: canonical form is dim 0 with the -inf
            # sentinel, which wins every tie (lowest threshold).
            stump = Stump(0, float("-inf"), 1 if total >= 0.0 else -1)
        else:
            p = best_p
            order_col = self._order_rows[best_dim].astype(np.int64)
            zcol = self.points[:, best_dim]
            theta = midpoint_threshold(float(zcol[order_col[p - 1]]), float(zcol[order_col[p]]))
            edge = total - 2.0 * float(np.sum(c[order_col[:p]]))
            stump = Stump(best_dim, theta, 1 if edge >= 0.0 else -1)
        score = float(np.dot(c, stump.evaluate(self.points)))
        return stump, score


def train_stump(points: np.ndarray, c: np.ndarray, idx: SortedIndex | None = None) -> tuple[Stump, float]:
    """Best stump for signed weights c; score equals the exhaustive maximum."""
    return StumpSearch(points, idx).best(c)


def wlda_direction(points: np.ndarray, labels: np.ndarray, weights: np.ndarray,
                   ridge: float | None = None) -> WldaDirection:
    """Weighted Fisher direction between the +1 and -1 labeled groups.

    ridge defaults to 1e-6 * trace(Sigma1 + Sigma2) / d, enough to make the
    frequent rank-deficient desk-scale covariances solvable.
    """
    pts = np.asarray(points, dtype=np.float64)
    labs = np.asarray(labels)
    wts = np.asarray(weights, dtype=np.float64)
    scatter = np.zeros((pts.shape[1], pts.shape[1]))
    means = []
    for sign in (1, -1):
        mask = (labs > 0) if sign > 0 else (labs < 0)
        w = wts[mask]
        total = float(w.sum())
        if total <= 0.0:
            raise NumericError("each class needs positive total weight")
        mu = (w @ pts[mask]) / total
        centered = pts[mask] - mu
        scatter += (centered * w[:, None]).T @ centered / total
        means.append(mu)
    if ridge is None:
        ridge = 1e-6 * float(np.trace(scatter)) / pts.shape[1]
    system = scatter + ridge * np.eye(pts.shape[1])
    try:
        direction = np.linalg.solve(system, means[0] - means[1])
    except np.linalg.LinAlgError as exc:
        raise NumericError(f"singular weighted-covariance system: {exc}") from None
    if not np.all(np.isfinite(direction)):
        raise NumericError("non-finite weighted-LDA direction")
    return WldaDirection(direction=direction, ridge=float(ridge))


def train_wlda_stump(points: np.ndarray, labels: np.ndarray, weights: np.ndarray,
                     ridge: float | None = None) -> tuple[WldaDirection, Stump]:
    """Fisher direction plus the best stump on the projected 1-D values."""
    wlda = wlda_direction(points, labels, weights, ridge)
    projected = (np.asarray(points, dtype=np.float64) @ wlda.direction)[:, None]
    signed = np.asarray(weights, dtype=np.float64) * np.where(np.asarray(labels) > 0, 1.0, -1.0)
    stump, _ = train_stump(projected, signed)
    return wlda, stump
