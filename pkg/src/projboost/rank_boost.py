"""Boosting over per-class projections of the raw data.

Each class routes the input through its own Gaussian matrix; a single
shared coefficient vector w scores the m(k-1) pairwise constraints
"correct class beats class r".  Training selects the stump with the
largest pair-weighted edge over all m*k projected points, then updates w
either in closed form (stage-wise) or by re-solving the regularized
primal over all selected stumps (totally corrective).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError, NumericError
from . import optim, rng
from .projection import ProjectionBank, bank_from_descriptor, project_views
from .weak import LinearStump, Stump, StumpSearch, train_stump, wlda_direction

# Floor applied to odds-ratio masses before logs, and the matching cap on
# the closed-form coefficient: 0.25 * ln(1e12).
ODDS_FLOOR = 1e-12
WEIGHT_CAP = 0.25 * math.log(1e12)

# Dual-violation slack for the totally-corrective stopping test.
STOP_SLACK = 1e-5

# On fully separated pairs the exponential objective log sum exp(-rho) +
# nu 1'w is unbounded below when nu is small, and the solve diverges
# along a separating ray.  Legitimate objectives sit far above this.
DIVERGENCE_FLOOR = -1e4

# Dimensions drawn per iteration when the weighted-LDA weak learner runs
# on the projected space.
WLDA_SUBSAMPLE = 1000


@dataclass
class RankModel:
    """Bank descriptor plus the ordered stumps and their coefficients."""

    bank_descriptor: dict
    stumps: list
    w: np.ndarray
    k: int
    d: int
    n: int
    label_map: tuple = ()
    mode: str = "stagewise-discrete"

    def bank(self) -> ProjectionBank:
        cached = getattr(self, "_bank_cache", None)
        if cached is None:
            cached = bank_from_descriptor(self.bank_descriptor)
            self._bank_cache = cached
        return cached


@dataclass
class RankTrainState:
    """Mutable loop state: pair weights, margins, and cached projections."""

    pair_i: np.ndarray
    pair_r: np.ndarray
    pos_y: np.ndarray  # stacked-point index of (i, y_i) per pair
    pos_r: np.ndarray  # stacked-point index of (i, r) per pair
    u: np.ndarray
    rho: np.ndarray
    stacked: np.ndarray
    search: StumpSearch
    m: int
    k: int
    log_objective: float = 0.0
    history: list = field(default_factory=list)


def build_pairs(labels: np.ndarray, k: int) -> tuple[np.ndarray, np.ndarray]:
    """Canonical pair order: for each sample i, classes 1..k skipping y_i."""
    m = labels.shape[0]
    grid_r = np.tile(np.arange(1, k + 1), m)
    grid_i = np.repeat(np.arange(m), k)
    keep = grid_r != labels[grid_i]
    return grid_i[keep], grid_r[keep]


def _init_state(ds, bank: ProjectionBank) -> RankTrainState:
    if bank.variant != "rank":
        raise DataError("rank training needs a rank-variant bank")
    if bank.cols != ds.d:
        raise DataError(f"bank cols {bank.cols} != data dimension {ds.d}")
    if bank.k != ds.k:
        raise DataError(f"bank k {bank.k} != data k {ds.k}")
    views = project_views(bank, ds)
    stacked = np.vstack(views.arrays)
    bank._views_cache = None  # keep one copy of the k*m*n reals, not two
    pair_i, pair_r = build_pairs(ds.labels, ds.k)
    pos_y = (ds.labels[pair_i] - 1) * ds.m + pair_i
    pos_r = (pair_r - 1) * ds.m + pair_i
    pairs = pair_i.shape[0]
    return RankTrainState(
        pair_i=pair_i,
        pair_r=pair_r,
        pos_y=pos_y,
        pos_r=pos_r,
        u=np.full(pairs, 1.0 / pairs),
        rho=np.zeros(pairs),
        stacked=stacked,
        search=StumpSearch(stacked),
        m=ds.m,
        k=ds.k,
        log_objective=math.log(pairs),
    )


def pairpoint_weights(state: RankTrainState) -> np.ndarray:
    """Signed per-point weights c with sum_p c_p h(z_p) = sum_pairs u delta_h.

    Point (i, y_i) collects +sum_{r != y_i} u_ir; point (i, r) gets -u_ir.
    """
    c = np.zeros(state.stacked.shape[0])
    np.add.at(c, state.pos_y, state.u)
    np.subtract.at(c, state.pos_r, state.u)
    return c


def pair_deltas(state: RankTrainState, outputs: np.ndarray) -> np.ndarray:
    """delta_h per pair from stacked-point outputs: h(correct) - h(wrong)."""
    return outputs[state.pos_y] - outputs[state.pos_r]


def stagewise_weight_discrete(q_plus: float, q_minus: float) -> float:
    """w_t = 0.25 log(Q+/Q-), floored and capped to stay finite."""
    ratio = max(q_plus, ODDS_FLOOR) / max(q_minus, ODDS_FLOOR)
    return float(np.clip(0.25 * math.log(ratio), -WEIGHT_CAP, WEIGHT_CAP))


def stagewise_weight_real(b: float) -> float:
    """w_t = 0.5 log((1+b)/(1-b)) for b in (-1, 1), clamped near the poles."""
    b = float(np.clip(b, -(1.0 - 1e-12), 1.0 - 1e-12))
    return 0.5 * math.log((1.0 + b) / (1.0 - b))


def _best_weak(state: RankTrainState, c: np.ndarray, weak: str, weak_seed: int, t: int):
    """Best stump, optionally challenged by a weighted-LDA linear stump.

    The linear stump is trained on a seeded subsample of the projected
    dimensions; the plain stump wins ties.
    """
    stump, score = state.search.best(c)
    if weak != "wlda":
        return stump, score
    n = state.stacked.shape[1]
    dims = np.sort(rng.permutation(rng.derive(weak_seed, t), n)[: min(WLDA_SUBSAMPLE, n)])
    labels = np.where(c >= 0.0, 1, -1)
    weights = np.abs(c)
    try:
        direction = wlda_direction(state.stacked[:, dims], labels, weights)
    except NumericError:
        return stump, score
    feature = (state.stacked[:, dims] @ direction.direction)[:, None]
    flat, flat_score = train_stump(feature, c)
    if flat_score > score:
        linear = LinearStump(
            dims=tuple(int(v) for v in dims),
            direction=tuple(float(v) for v in direction.direction),
            threshold=flat.threshold,
            polarity=flat.polarity,
        )
        return linear, flat_score
    return stump, score


def train_stagewise(ds, bank: ProjectionBank, T: int, mode: str = "discrete",
                    weak: str = "stump", weak_seed: int = 0,
                    progress=None) -> RankModel:
    """Stage-wise boosting: closed-form coefficient per iteration.

    Stops early when no stump has a positive edge.  The exponential-loss
    training objective is checked to be non-increasing every iteration.
    """
    if mode not in ("discrete", "real"):
        raise ValueError(f"unknown stage-wise mode {mode!r}")
    state = _init_state(ds, bank)
    stumps: list = []
    ws: list = []
    scores = np.zeros((ds.m, ds.k))
    for t in range(1, T + 1):
        c = pairpoint_weights(state)
        stump, edge = _best_weak(state, c, weak, weak_seed, t)
        if edge <= 0.0:
            break
        outputs = stump.evaluate(state.stacked)
        delta = pair_deltas(state, outputs)
        if mode == "discrete":
            w_t = stagewise_weight_discrete(
                float(np.sum(state.u[delta > 0.0])), float(np.sum(state.u[delta < 0.0]))
            )
            step = delta * w_t
        else:
            w_t = stagewise_weight_real(0.5 * float(np.dot(state.u, delta)))
            step = 0.5 * delta * w_t
        unnormalized = state.u * np.exp(-step)
        z = float(np.sum(unnormalized))
        if z > 1.0 + 1e-9:
            raise NumericError(f"iteration {t}: objective increased (Z = {z})")
        state.u = unnormalized / z
        state.rho += step
        state.log_objective += math.log(z)
        stumps.append(stump)
        ws.append(w_t)
        scores += w_t * outputs.reshape(ds.k, ds.m).T
        train_error = float(np.mean(np.argmax(scores, axis=1) + 1 != ds.labels))
        record = {
            "t": t,
            "edge": edge,
            "w_t": w_t,
            "log_objective": state.log_objective,
            "train_error": train_error,
        }
        state.history.append(record)
        if progress is not None:
            progress(record)
    return RankModel(
        bank_descriptor=bank.descriptor(),
        stumps=stumps,
        w=np.asarray(ws),
        k=ds.k,
        d=ds.d,
        n=bank.rows,
        label_map=ds.label_map,
        mode=f"stagewise-{mode}",
    )


def train_totally_corrective(ds, bank: ProjectionBank, T: int, nu: float,
                             loss: str = "exp", spec: optim.SolverSpec | None = None,
                             weak: str = "stump", weak_seed: int = 0,
                             progress=None) -> RankModel:
    """Column generation: add the most violated stump, re-solve the primal.

    Stops when the best edge is within STOP_SLACK of the regularizer nu.
    Pair weights refresh through the loss's KKT map after every solve.
    """
    if nu <= 0.0:
        raise ValueError("nu must be positive for totally-corrective training")
    loss_spec = optim.get_loss(loss)
    spec = spec or optim.SolverSpec()
    state = _init_state(ds, bank)
    if loss == "logistic":
        state.u = optim.kkt_weights_logistic(state.rho, ds.m, ds.k)
    pairs = state.u.shape[0]
    delta_cols = np.empty((pairs, T))
    stumps: list = []
    w = np.zeros(0)
    for t in range(1, T + 1):
        c = pairpoint_weights(state)
        stump, edge = _best_weak(state, c, weak, weak_seed, t)
        if edge <= nu + STOP_SLACK:
            break
        outputs = stump.evaluate(state.stacked)
        delta_cols[:, t - 1] = pair_deltas(state, outputs)
        stumps.append(stump)
        rows = delta_cols[:, :t]
        w_new = minimize_with_warm_start(loss_spec, rows, nu, w, ds.m, ds.k, spec)
        value, _ = loss_spec.primal(w_new, rows, nu, ds.m, ds.k)
        if value < DIVERGENCE_FLOOR:
            # Unbounded regime: keep the last well-posed restricted solution.
            stumps.pop()
            break
        w = w_new
        state.rho = rows @ w
        state.u = loss_spec.kkt(state.rho, ds.m, ds.k)
        scores = score_matrix(state, stumps, w, ds.m, ds.k)
        train_error = float(np.mean(np.argmax(scores, axis=1) + 1 != ds.labels))
        record = {"t": t, "edge": edge, "objective": value, "train_error": train_error}
        state.history.append(record)
        if progress is not None:
            progress(record)
    return RankModel(
        bank_descriptor=bank.descriptor(),
        stumps=stumps,
        w=np.asarray(w),
        k=ds.k,
        d=ds.d,
        n=bank.rows,
        label_map=ds.label_map,
        mode=f"tc-{loss}",
    )


def minimize_with_warm_start(loss_spec, rows, nu, w_prev, m, k, spec) -> np.ndarray:
    """Re-solve the restricted primal, starting from the previous w plus a zero."""
    w0 = np.zeros(rows.shape[1])
    w0[: w_prev.shape[0]] = w_prev
    return optim.minimize_bounded(
        lambda w: loss_spec.primal(w, rows, nu, m, k), w0, spec
    )


def score_matrix(state, stumps, w, m, k) -> np.ndarray:
    """Per-sample per-class ensemble scores from stacked stump outputs."""
    scores = np.zeros((m, k))
    for stump_t, w_t in zip(stumps, w):
        out = stump_t.evaluate(state.stacked)
        scores += w_t * out.reshape(k, m).T
    return scores


def predict_rank_batch(model: RankModel, features: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Labels and k-column score matrix for a feature matrix."""
    feats = np.asarray(features, dtype=np.float64)
    if feats.ndim != 2 or feats.shape[1] != model.d:
        raise DataError(f"feature matrix must be ? x {model.d}")
    bank = model.bank()
    scores = np.zeros((feats.shape[0], model.k))
    if model.stumps:
        for r in range(1, model.k + 1):
            view = feats @ bank.matrix(r).T
            col = np.zeros(feats.shape[0])
            for stump_t, w_t in zip(model.stumps, model.w):
                col += w_t * stump_t.evaluate(view)
            scores[:, r - 1] = col
    labels = np.argmax(scores, axis=1) + 1
    return labels, scores


def predict_rank(model: RankModel, x: np.ndarray) -> tuple[int, np.ndarray]:
    """Predicted label (ties to the lowest class index) and per-class scores."""
    vec = np.asarray(x, dtype=np.float64)
    if vec.shape != (model.d,):
        raise DataError(f"expected a length-{model.d} vector")
    labels, scores = predict_rank_batch(model, vec[None, :])
    return int(labels[0]), scores[0]
