"""Boosting by randomly projecting weak-learner outputs.

Stumps are trained on the original features; each class projects the
growing output vector [h_1(x), ..., h_t(x)] through its own n x T
Gaussian matrix, and one nonnegative coefficient vector w in R^n (fixed
size, independent of the iteration count) is re-solved totally
correctively under the mean logistic loss.  Weak-learner selection
depends on all previously selected stumps through the history constant
C_v, unlike conventional boosting.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError
from . import optim
from .projection import ProjectionBank, bank_from_descriptor
from .rank_boost import build_pairs
from .weak import Stump, build_sort_index, midpoint_threshold

# Relative slack on the per-iteration objective comparison: increases
# within this band count as flat, larger ones trigger the no-decrease
# stop.  Decrease is an empirical property here, not a guarantee.
OBJECTIVE_SLACK = 1e-6

DEFAULT_EPS_REL = 1e-5


@dataclass
class ProjModel:
    """T' <= T stumps on raw features plus the shared length-n coefficients."""

    bank_descriptor: dict
    stumps: list
    w: np.ndarray
    k: int
    d: int
    n: int
    T: int
    label_map: tuple = ()

    def bank(self) -> ProjectionBank:
        cached = getattr(self, "_bank_cache", None)
        if cached is None:
            cached = bank_from_descriptor(self.bank_descriptor)
            self._bank_cache = cached
        return cached


@dataclass
class ProjTrainState:
    """Mutable loop state shared by weak selection and the solver."""

    features: np.ndarray
    labels: np.ndarray
    pair_i: np.ndarray
    pair_r: np.ndarray
    H: np.ndarray  # m x T stump outputs, first t columns filled
    A: np.ndarray  # pairs x n accumulated margins matrix: rho = A w
    u: np.ndarray
    w: np.ndarray
    t: int  # next column index, 1-based
    prev_objective: float
    m: int
    k: int
    sort_order: np.ndarray  # m x d, original-feature sort permutations
    invalid_rows: list  # per dim: boundary rows suppressed in the edge search
    history: list = field(default_factory=list)


def _class_columns(bank: ProjectionBank, t: int) -> np.ndarray:
    """Column t (1-based) of every class matrix, stacked k x n."""
    return np.stack([bank.matrices[r][:, t - 1] for r in range(bank.k)])


def init_state(ds, bank: ProjectionBank) -> ProjTrainState:
    if bank.variant != "proj":
        raise DataError("proj training needs a proj-variant bank")
    if bank.k != ds.k:
        raise DataError(f"bank k {bank.k} != data k {ds.k}")
    pair_i, pair_r = build_pairs(ds.labels, ds.k)
    pairs = pair_i.shape[0]
    n = bank.rows
    sort_idx = build_sort_index(ds.features)
    order = sort_idx.order.astype(np.int64)
    sorted_vals = np.take_along_axis(ds.features, order, axis=0)
    invalid_rows = []
    for j in range(ds.d):
        bad = np.flatnonzero(sorted_vals[:-1, j] == sorted_vals[1:, j])
        invalid_rows.append(np.append(bad, ds.m - 1))
    return ProjTrainState(
        features=ds.features,
        labels=ds.labels,
        pair_i=pair_i,
        pair_r=pair_r,
        H=np.zeros((ds.m, bank.cols)),
        A=np.zeros((pairs, n)),
        u=np.full(pairs, 1.0 / (2.0 * ds.m * ds.k)),
        w=np.zeros(n),
        t=1,
        prev_objective=math.log(2.0),
        m=ds.m,
        k=ds.k,
        sort_order=order,
        invalid_rows=invalid_rows,
    )


def dual_constraint_values(state: ProjTrainState) -> np.ndarray:
    """Constraint left-hand sides sum_ir u_ir (delta_P H)_v, one per coordinate v."""
    return state.A.T @ state.u


def _pair_weight_matrices(state: ProjTrainState, bank: ProjectionBank):
    """Per-sample weight pieces for the next bank column.

    Returns (g_total, class_cols): g_total[i] = sum_{r != y_i} u_ir, and the
    k x n stack of column-t entries.
    """
    s = np.bincount(state.pair_i, weights=state.u, minlength=state.m)
    cols = _class_columns(bank, state.t)
    return s, cols


def row_instance_weights(state: ProjTrainState, bank: ProjectionBank, t: int, v: int) -> np.ndarray:
    """Signed per-sample weights g for candidate coordinate v at column t.

    g_i = sum_{r != y_i} u_ir (P^(y_i)_{v,t} - P^(r)_{v,t}); a candidate
    (h, v) scores C_v + sum_i g_i h(x_i) where C_v collects the history
    term sum_ir u_ir sum_{j<t} deltaP_{v,j} H_{i,j}.
    """
    if not 1 <= v <= bank.rows:
        raise DataError(f"coordinate {v} outside 1..{bank.rows}")
    if t != state.t:
        raise DataError(f"state is at column {state.t}, not {t}")
    col_v = np.array([bank.matrices[r][v - 1, t - 1] for r in range(bank.k)])
    s = np.bincount(state.pair_i, weights=state.u, minlength=state.m)
    U = np.zeros((state.m, state.k))
    U[state.pair_i, state.pair_r - 1] = state.u
    return s * col_v[state.labels - 1] - U @ col_v


def select_weak(state: ProjTrainState, bank: ProjectionBank) -> tuple[Stump, int, float]:
    """Jointly best (stump, coordinate) for the next column.

    Maximizes C_v + sum_i g_i h(x_i) over v in 1..n and all stumps on the
    original features; ties break to the lowest v, then canonical stump
    order (lowest dim, lowest threshold, polarity +1 first).
    """
    if state.t > bank.cols:
        raise DataError("all bank columns are already used")
    m, d, n = state.m, state.features.shape[1], bank.rows
    s, cols = _pair_weight_matrices(state, bank)
    U = np.zeros((m, state.k))
    U[state.pair_i, state.pair_r - 1] = state.u
    G = s[:, None] * cols[state.labels - 1] - U @ cols  # m x n
    C = dual_constraint_values(state)
    totals = G.sum(axis=0)
    # Constant classifier enters first (dim 0, -inf threshold): later
    # candidates must strictly beat it, which encodes the tie-break.
    best_edge = np.abs(totals)
    best_dim = np.full(n, -1)
    best_p = np.zeros(n, dtype=np.int64)
    for j in range(d):
        W = G[state.sort_order[:, j], :]
        np.cumsum(W, axis=0, out=W)
        W *= -2.0
        W += totals[None, :]
        np.abs(W, out=W)
        W[state.invalid_rows[j], :] = -1.0
        col_best = W.max(axis=0)
        improve = col_best > best_edge
        if np.any(improve):
            best_edge[improve] = col_best[improve]
            best_dim[improve] = j
            best_p[improve] = np.argmax(W[:, improve], axis=0) + 1
    v_star = int(np.argmax(C + best_edge))
    if best_dim[v_star] < 0:
        stump = Stump(0, float("-inf"), 1 if totals[v_star] >= 0.0 else -1)
    else:
        j = int(best_dim[v_star])
        p = int(best_p[v_star])
        order_col = state.sort_order[:, j]
        zcol = state.features[:, j]
        theta = midpoint_threshold(float(zcol[order_col[p - 1]]), float(zcol[order_col[p]]))
        edge = float(totals[v_star]) - 2.0 * float(np.sum(G[order_col[:p], v_star]))
        stump = Stump(j, theta, 1 if edge >= 0.0 else -1)
    score = float(C[v_star]) + float(np.dot(G[:, v_star], stump.evaluate(state.features)))
    return stump, v_star + 1, score


def reported_objective(state: ProjTrainState, nu: float) -> float:
    """Mean logistic objective including the constant log 2 per diagonal pair."""
    value, _ = optim.logistic_mean_objective(
        state.w, state.A, nu, 1.0 / (state.m * state.k)
    )
    return value + state.m * math.log(2.0) / (state.m * state.k)


def train_proj(ds, bank: ProjectionBank, T: int, nu: float,
               eps_rel: float = DEFAULT_EPS_REL,
               spec: optim.SolverSpec | None = None,
               progress=None) -> ProjModel:
    """Column generation with a fixed-size coefficient vector.

    Per iteration: select the best (stump, coordinate), append the stump's
    outputs, re-solve the logistic primal over w >= 0 warm-started from
    the previous w, refresh pair weights from the KKT map, and stop once
    the relative objective change drops below eps_rel or t = T.  If an
    iteration fails to decrease the objective it is rolled back and
    training ends there, so the recorded objectives are non-increasing.
    """
    if nu <= 0.0:
        raise ValueError("nu must be positive")
    if T != bank.cols:
        raise DataError(f"T = {T} must match the bank's column count {bank.cols}")
    spec = spec or optim.SolverSpec()
    state = init_state(ds, bank)
    stumps: list = []
    inv_mk = 1.0 / (ds.m * ds.k)
    pair_y = ds.labels[state.pair_i] - 1
    stop_reason = "max-iterations"
    for t in range(1, T + 1):
        tick = time.perf_counter()
        stump, v, score = select_weak(state, bank)
        select_seconds = time.perf_counter() - tick
        h_col = stump.evaluate(ds.features)
        cols = _class_columns(bank, t)
        block = h_col[state.pair_i, None] * (cols[pair_y] - cols[state.pair_r - 1])
        w_prev = state.w
        u_prev = state.u
        state.A += block
        state.H[:, t - 1] = h_col
        stumps.append(stump)
        tick = time.perf_counter()
        state.w = optim.minimize_bounded(
            lambda w: optim.logistic_mean_objective(w, state.A, nu, inv_mk),
            state.w.copy(),
            spec,
        )
        solve_seconds = time.perf_counter() - tick
        state.u = optim.kkt_weights_logistic(state.A @ state.w, ds.m, ds.k)
        objective = reported_objective(state, nu)
        if objective > state.prev_objective + max(1e-9, OBJECTIVE_SLACK * abs(state.prev_objective)):
            # Existing margins shift when a column is appended, so unlike
            # nested column generation the objective can move up.  That is
            # the "no further decrease" stop: undo this iteration and end.
            stumps.pop()
            state.A -= block
            state.H[:, t - 1] = 0.0
            state.w = w_prev
            state.u = u_prev
            state.t = t
            stop_reason = "no-decrease"
            break
        train_error = float(np.mean(predict_scores(state, bank, stumps) != ds.labels))
        record = {
            "t": t,
            "v": v,
            "score": score,
            "objective": objective,
            "train_error": train_error,
            "select_seconds": select_seconds,
            "solve_seconds": solve_seconds,
        }
        state.history.append(record)
        if progress is not None:
            progress(record)
        rel_change = abs(state.prev_objective - objective) / abs(state.prev_objective)
        state.prev_objective = objective
        state.t = t + 1
        if rel_change < eps_rel:
            stop_reason = "eps-rel"
            break
    model = ProjModel(
        bank_descriptor=bank.descriptor(),
        stumps=stumps,
        w=state.w.copy(),
        k=ds.k,
        d=ds.d,
        n=bank.rows,
        T=bank.cols,
        label_map=ds.label_map,
    )
    model.stop_reason = stop_reason
    return model


def predict_scores(state: ProjTrainState, bank: ProjectionBank, stumps: list) -> np.ndarray:
    """Training-set predicted labels under the current (stumps, w)."""
    t = len(stumps)
    coeffs = np.stack([bank.matrices[r].T @ state.w for r in range(bank.k)])  # k x T
    scores = state.H[:, :t] @ coeffs[:, :t].T
    return np.argmax(scores, axis=1) + 1


def predict_proj_batch(model: ProjModel, features: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Labels and score matrix; untrained columns contribute zero."""
    feats = np.asarray(features, dtype=np.float64)
    if feats.ndim != 2 or feats.shape[1] != model.d:
        raise DataError(f"feature matrix must be ? x {model.d}")
    t = len(model.stumps)
    scores = np.zeros((feats.shape[0], model.k))
    if t:
        bank = model.bank()
        H = np.column_stack([s.evaluate(feats) for s in model.stumps])
        coeffs = np.stack([bank.matrices[r].T @ model.w for r in range(model.k)])
        scores = H @ coeffs[:, :t].T
    labels = np.argmax(scores, axis=1) + 1
    return labels, scores


def predict_proj(model: ProjModel, x: np.ndarray) -> tuple[int, np.ndarray]:
    """Predicted label (ties to the lowest class index) and per-class scores."""
    vec = np.asarray(x, dtype=np.float64)
    if vec.shape != (model.d,):
        raise DataError(f"expected a length-{model.d} vector")
    labels, scores = predict_proj_batch(model, vec[None, :])
    return int(labels[0]), scores[0]
