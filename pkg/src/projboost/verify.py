"""Monte-Carlo certification of the projection guarantees.

Four checks, each counting how often a freshly drawn Gaussian projection
preserves the quantity its guarantee covers: squared norms, cosines of
acute pairs, the multi-class margin of a (coefficients, responses)
instance, and the single-shared-vector margin form.  Empirical rates are
compared against the closed-form probability bounds; every trial reads an
independent substream of the master seed, so reports are reproducible and
independent of execution order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import rng
from .errors import DataError


def tail(n: int, eps: float) -> float:
    """exp(-(n/2)(eps^2/2 - eps^3/3)), the one-sided chi-square tail."""
    return math.exp(-(n / 2.0) * (eps * eps / 2.0 - eps ** 3 / 3.0))


def norm_bound(n: int, eps: float) -> float:
    return 1.0 - 2.0 * tail(n, eps)


def cosine_bound(n: int, eps: float) -> float:
    return 1.0 - 6.0 * tail(n, eps)


def margin_bound(n: int, eps: float, k: int, m: int) -> float:
    return max(0.0, 1.0 - 6.0 * k * m * tail(n, eps))


def single_vector_bound(n: int, eps: float, k: int, m: int) -> float:
    return max(0.0, 1.0 - 6.0 * m * (k - 1) * tail(n, eps))


def margin_dimension_threshold(eps: float, k: int, m: int, delta: float) -> float:
    """Smallest projected dimension covering a km-pair union bound at level delta."""
    return 12.0 / (3.0 * eps * eps - 2.0 * eps ** 3) * math.log(6.0 * k * m / delta)


def single_vector_dimension_threshold(eps: float, k: int, m: int, delta: float) -> float:
    """As above for the m(k-1) pair events of the single-vector form."""
    return 12.0 / (3.0 * eps * eps - 2.0 * eps ** 3) * math.log(6.0 * m * (k - 1) / delta)


def projected_margin_floor(eps: float, gamma: float) -> float:
    """Margin retained after projecting both coefficients and responses."""
    return (
        -(1.0 + 3.0 * eps) / (1.0 - eps * eps)
        + math.sqrt(1.0 - eps * eps) / (1.0 + eps)
        + (1.0 + eps) / (1.0 - eps) * gamma
    )


def single_vector_floor(eps: float, gamma: float, k: int) -> float:
    return -2.0 * eps / (1.0 - eps) + gamma * (1.0 + eps) / (math.sqrt(2.0 * k) * (1.0 - eps))


def cosine_interval(eps: float, gamma: float) -> tuple[float, float]:
    """Two-sided bracket for the projected cosine of a pair with cosine gamma."""
    lo = 1.0 - (1.0 + eps) / (1.0 - eps) * (1.0 - gamma)
    hi = (
        1.0
        - math.sqrt(1.0 - eps * eps) / (1.0 + eps)
        + eps / (1.0 + eps)
        + (1.0 - eps) / (1.0 + eps) * gamma
    )
    return lo, hi


@dataclass(frozen=True)
class FrequencyReport:
    """Outcome of one Monte-Carlo check."""

    op: str
    trials: int
    successes: int
    theoretical_bound: float
    parameters: dict

    @property
    def empirical_rate(self) -> float:
        return self.successes / self.trials

    def three_sigma_slack(self) -> float:
        b = min(max(self.theoretical_bound, 0.0), 1.0)
        return 3.0 * math.sqrt(b * (1.0 - b) / self.trials)

    def to_record(self) -> dict:
        return {
            "op": self.op,
            "params": dict(self.parameters),
            "trials": self.trials,
            "successes": self.successes,
            "bound": self.theoretical_bound,
        }

    def text_table(self) -> str:
        rows = [
            ("op", self.op),
            ("trials", self.trials),
            ("successes", self.successes),
            ("empirical_rate", f"{self.empirical_rate:.6f}"),
            ("theoretical_bound", f"{self.theoretical_bound:.6f}"),
        ]
        rows.extend(sorted(self.parameters.items()))
        width = max(len(str(name)) for name, _ in rows)
        return "\n".join(f"{name:<{width}}  {value}" for name, value in rows)


def _check_eps(eps: float) -> None:
    if not 0.0 < eps < 1.0:
        raise ValueError("eps must lie in (0, 1)")


def _gauss(key: np.uint64, rows: int, cols: int) -> np.ndarray:
    """rows x cols matrix with entries a_ij / sqrt(rows), a_ij ~ N(0,1)."""
    return rng.normals(key, rows * cols).reshape(rows, cols) / math.sqrt(rows)


def _unit(key: np.uint64, d: int) -> np.ndarray:
    z = rng.normals(key, d)
    norm = float(np.linalg.norm(z))
    return z / norm


def check_norm_preservation(n: int, d: int, eps: float, trials: int, seed: int) -> FrequencyReport:
    """Frequency of (1-eps) <= ||Px||^2 / ||x||^2 <= (1+eps)."""
    _check_eps(eps)
    successes = 0
    for trial in range(trials):
        base = rng.derive(seed, trial)
        x = _unit(rng.derive(base, 0), d)
        p = _gauss(rng.derive(base, 1), n, d)
        ratio = float(np.dot(p @ x, p @ x))
        if 1.0 - eps <= ratio <= 1.0 + eps:
            successes += 1
    return FrequencyReport(
        op="norm-preservation",
        trials=trials,
        successes=successes,
        theoretical_bound=norm_bound(n, eps),
        parameters={"n": n, "d": d, "eps": eps},
    )


def random_acute_pair(base: np.uint64, d: int) -> tuple[np.ndarray, np.ndarray, float]:
    """Unit pair with strictly positive cosine; non-acute draws are retried."""
    for attempt in range(1000):
        w = _unit(rng.derive(base, 1 + 2 * attempt), d)
        x = _unit(rng.derive(base, 2 + 2 * attempt), d)
        gamma = float(np.dot(w, x))
        if gamma > 0.0:
            return w, x, min(gamma, 1.0)
    raise DataError("could not draw an acute pair")  # pragma: no cover


def check_cosine_preservation(n: int, d: int, eps: float, trials: int, seed: int) -> FrequencyReport:
    """Frequency of the projected cosine landing in its two-sided bracket."""
    _check_eps(eps)
    successes = 0
    for trial in range(trials):
        base = rng.derive(seed, trial)
        p_key = rng.derive(base, 0)
        w, x, gamma = random_acute_pair(base, d)
        p = _gauss(p_key, n, d)
        pw = p @ w
        px = p @ x
        cos_p = float(np.dot(pw, px) / (np.linalg.norm(pw) * np.linalg.norm(px)))
        cos_p = min(max(cos_p, -1.0), 1.0)
        lo, hi = cosine_interval(eps, gamma)
        if lo <= cos_p <= hi:
            successes += 1
    return FrequencyReport(
        op="cosine-preservation",
        trials=trials,
        successes=successes,
        theoretical_bound=cosine_bound(n, eps),
        parameters={"n": n, "d": d, "eps": eps},
    )


def _cosine_rows(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Pairwise cosines: rows of A (k x T) against rows of B (m x T), k x m."""
    num = A @ B.T
    denom = np.linalg.norm(A, axis=1)[:, None] * np.linalg.norm(B, axis=1)[None, :]
    return num / denom


def multiclass_margin(W: np.ndarray, H: np.ndarray, labels: np.ndarray) -> float:
    """min_i [cos(w_{y_i}, H_i) - max_{r != y_i} cos(w_r, H_i)]."""
    cosines = _cosine_rows(W, H)  # k x m
    m = H.shape[0]
    own = cosines[labels - 1, np.arange(m)]
    rivals = cosines.copy()
    rivals[labels - 1, np.arange(m)] = -np.inf
    return float(np.min(own - rivals.max(axis=0)))


def _require_margin(W, H, labels, gamma) -> None:
    measured = multiclass_margin(W, H, labels)
    if measured < gamma - 1e-12:
        raise DataError(
            f"instance margin {measured:.6f} is below the declared gamma {gamma}"
        )


def check_margin_preservation(W: np.ndarray, H: np.ndarray, labels: np.ndarray,
                              gamma: float, eps: float, n: int,
                              trials: int, seed: int) -> FrequencyReport:
    """Margin survival when one shared P hits both coefficients and responses.

    Success on a trial means the projected instance's multi-class margin
    is at least -(1+3eps)/(1-eps^2) + sqrt(1-eps^2)/(1+eps)
    + (1+eps)/(1-eps)*gamma.
    """
    _check_eps(eps)
    W = np.asarray(W, dtype=np.float64)
    H = np.asarray(H, dtype=np.float64)
    labels = np.asarray(labels)
    _require_margin(W, H, labels, gamma)
    k, T = W.shape
    m = H.shape[0]
    floor = projected_margin_floor(eps, gamma)
    successes = 0
    for trial in range(trials):
        p = _gauss(rng.derive(seed, trial), n, T)
        if multiclass_margin(W @ p.T, H @ p.T, labels) >= floor:
            successes += 1
    return FrequencyReport(
        op="margin-preservation",
        trials=trials,
        successes=successes,
        theoretical_bound=margin_bound(n, eps, k, m),
        parameters={"n": n, "eps": eps, "gamma": gamma, "k": k, "m": m, "T": T},
    )


def check_single_vector(W: np.ndarray, H: np.ndarray, labels: np.ndarray,
                        gamma: float, eps: float, n: int,
                        trials: int, seed: int) -> FrequencyReport:
    """Shared-vector margin form: v = R u with u the concatenated rows of W.

    Per trial R is n x kT Gaussian; with P_y its y-th n x T block, success
    means for every sample and every wrong class y',
    (<v, P_y H_i> - <v, P_y' H_i>) / (||v|| sqrt(||P_y H_i||^2 + ||P_y' H_i||^2))
    clears -2eps/(1-eps) + gamma (1+eps)/(sqrt(2k)(1-eps)).
    """
    _check_eps(eps)
    W = np.asarray(W, dtype=np.float64)
    H = np.asarray(H, dtype=np.float64)
    labels = np.asarray(labels)
    _require_margin(W, H, labels, gamma)
    k, T = W.shape
    m = H.shape[0]
    u = W.reshape(-1)
    floor = single_vector_floor(eps, gamma, k)
    successes = 0
    for trial in range(trials):
        R = _gauss(rng.derive(seed, trial), n, k * T)
        v = R @ u
        v_norm = float(np.linalg.norm(v))
        # proj[r] holds P_{r+1} H_i for all samples: k x m x n after transpose
        blocks = R.reshape(n, k, T)
        PH = np.einsum("nkt,mt->kmn", blocks, H)
        scores = PH @ v  # k x m
        norms2 = np.sum(PH * PH, axis=2)  # k x m
        ok = True
        for i in range(m):
            y = labels[i] - 1
            for r in range(k):
                if r == y:
                    continue
                lhs = (scores[y, i] - scores[r, i]) / (
                    v_norm * math.sqrt(norms2[y, i] + norms2[r, i])
                )
                if lhs < floor:
                    ok = False
                    break
            if not ok:
                break
        if ok:
            successes += 1
    return FrequencyReport(
        op="single-vector",
        trials=trials,
        successes=successes,
        theoretical_bound=single_vector_bound(n, eps, k, m),
        parameters={"n": n, "eps": eps, "gamma": gamma, "k": k, "m": m, "T": T},
    )


def make_one_hot_instance(k: int, m: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Axis-aligned instance with exact margin 1: W = I_k, H_i = e_{y_i}."""
    W = np.eye(k)
    labels = 1 + np.arange(m) % k
    H = W[labels - 1].copy()
    return W, H, labels
