"""Convex losses, their duals, and the bound-constrained smooth minimizer.

Both totally-corrective trainers funnel through this module: the
exponential log-sum loss with its Shannon-entropy conjugate, and the
mean logistic loss with its binary-entropy conjugate.  Dual variables are
the negative loss gradients at the current margins, which is what the
trainers use as pair weights.  All exponentials go through max-shifted or
log1p-style evaluations because margins grow linearly with the number of
selected weak learners.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize
from scipy.special import expit, logsumexp, softmax

from .errors import NumericError


@dataclass(frozen=True)
class SolverSpec:
    """Bound-constrained quasi-Newton settings.

    Defaults: 100 iterations, 1e-5 line-search accuracy, relative-decrease
    factor 1e7 * machine epsilon, 5 stored corrections, all coordinates
    bounded below by 0.  `line_search_tolerance` is carried for
    configuration reporting; the backend controls its line search by step
    counts rather than by an accuracy knob.
    """

    max_iterations: int = 100
    line_search_tolerance: float = 1e-5
    convergence_factor: float = 1e7 * float(np.finfo(np.float64).eps)
    history_size: int = 5
    lower_bound: float = 0.0
    gradient_tolerance: float = 1e-6

    def __post_init__(self):
        if self.max_iterations <= 0 or self.history_size <= 0:
            raise ValueError("solver budgets must be positive")
        if self.convergence_factor <= 0 or self.line_search_tolerance <= 0:
            raise ValueError("solver tolerances must be positive")


@dataclass(frozen=True)
class PairMargins:
    """Margins rho over the m*(k-1) pairs (i, r != y_i).

    `normalizer` scales the summed loss: 1 for the exponential log-sum
    objective, 1/(mk) for the mean logistic objective.
    """

    rho: np.ndarray
    pair_i: np.ndarray = field(default=None, repr=False)
    pair_r: np.ndarray = field(default=None, repr=False)
    normalizer: float = 1.0


def _margins(rho) -> np.ndarray:
    if isinstance(rho, PairMargins):
        return np.asarray(rho.rho, dtype=np.float64)
    return np.asarray(rho, dtype=np.float64)


def exp_logsum_objective(w: np.ndarray, delta_h: np.ndarray, nu: float) -> tuple[float, np.ndarray]:
    """log sum_p exp(-(delta_h w)_p) + nu * 1'w, with analytic gradient."""
    w = np.asarray(w, dtype=np.float64)
    rho = delta_h @ w
    value = float(logsumexp(-rho)) + nu * float(np.sum(w))
    u = softmax(-rho)
    grad = -(delta_h.T @ u) + nu
    return value, grad


def logistic_mean_objective(w: np.ndarray, rows: np.ndarray, nu: float,
                            normalizer: float) -> tuple[float, np.ndarray]:
    """normalizer * sum_p log(1 + exp(-(rows w)_p)) + nu * 1'w."""
    w = np.asarray(w, dtype=np.float64)
    rho = rows @ w
    value = normalizer * float(np.sum(np.logaddexp(0.0, -rho))) + nu * float(np.sum(w))
    s = expit(-rho)
    grad = -normalizer * (rows.T @ s) + nu
    return value, grad


def kkt_weights_exp(rho) -> np.ndarray:
    """u_p = exp(-rho_p) / sum exp(-rho); a strictly positive distribution."""
    return softmax(-_margins(rho))


def kkt_weights_logistic(rho, m: int, k: int) -> np.ndarray:
    """u_p = exp(-rho_p) / (mk (1 + exp(-rho_p))), each in (0, 1/(mk))."""
    return expit(-_margins(rho)) / (m * k)


def projected_gradient_norm(w: np.ndarray, grad: np.ndarray, lower: float = 0.0) -> float:
    """Infinity norm of the gradient projected onto the feasible directions."""
    pg = np.where(w > lower, grad, np.minimum(grad, 0.0))
    return float(np.max(np.abs(pg))) if pg.size else 0.0


def minimize_bounded(objective, w0: np.ndarray, spec: SolverSpec | None = None) -> np.ndarray:
    """Minimize a smooth convex objective over the nonnegative orthant.

    Runs L-BFGS-B, restarting with a fresh correction history if it halts
    on the relative-decrease test while the projected gradient is still
    above tolerance and iteration budget remains.  Deterministic given
    inputs.  The returned point satisfies
    ||pg||_inf <= gradient_tolerance * max(1, |f|) unless the budget ran out.
    """
    spec = spec or SolverSpec()
    w = np.maximum(np.asarray(w0, dtype=np.float64), spec.lower_bound)
    value, grad = objective(w)
    if not np.isfinite(value) or not np.all(np.isfinite(grad)):
        raise NumericError("objective is not finite at the starting point")
    bounds = [(spec.lower_bound, None)] * w.size
    remaining = spec.max_iterations
    while remaining > 0:
        result = minimize(
            objective,
            w,
            jac=True,
            method="L-BFGS-B",
            bounds=bounds,
            options={
                "maxiter": remaining,
                "maxcor": spec.history_size,
                "ftol": spec.convergence_factor,
                "gtol": spec.gradient_tolerance,
            },
        )
        new_w = np.maximum(result.x, spec.lower_bound)
        new_value, new_grad = objective(new_w)
        made_progress = new_value < value or not np.array_equal(new_w, w)
        w, value = new_w, new_value
        remaining -= max(int(result.nit), 1)
        tol = spec.gradient_tolerance * max(1.0, abs(value))
        if projected_gradient_norm(w, new_grad, spec.lower_bound) <= tol or not made_progress:
            break
    if not np.all(np.isfinite(w)):
        raise NumericError("solver produced non-finite coefficients")
    return w


def _entropy_dual_exp(u: np.ndarray, m: int, k: int) -> float:
    """Max-form Shannon dual: -sum u log u over the simplex."""
    u = np.asarray(u, dtype=np.float64)
    terms = np.where(u > 0.0, u * np.log(np.maximum(u, np.finfo(np.float64).tiny)), 0.0)
    return -float(np.sum(terms))


def _entropy_dual_logistic(u: np.ndarray, m: int, k: int) -> float:
    """Max-form binary-entropy dual evaluated at scaled weights x = mk u."""
    x = np.clip(np.asarray(u, dtype=np.float64) * (m * k), 1e-300, 1.0 - 1e-16)
    terms = x * np.log(x) + (1.0 - x) * np.log1p(-x)
    return -float(np.sum(terms)) / (m * k)


@dataclass(frozen=True)
class LossSpec:
    """Primal/dual/KKT bundle for one registered convex loss."""

    loss_id: str
    conjugate: str
    primal: object
    kkt: object
    dual: object


def conjugate_loss_table() -> dict[str, LossSpec]:
    """Registry pairing each loss with its conjugate-dual machinery.

    primal(w, rows, nu, m, k) -> (value, grad); kkt(rho, m, k) -> u;
    dual(u, m, k) -> dual objective value in max form, so that weak
    duality reads dual <= primal at any feasible weights.
    """
    return {
        "exp": LossSpec(
            loss_id="exp",
            conjugate="shannon-entropy",
            primal=lambda w, rows, nu, m, k: exp_logsum_objective(w, rows, nu),
            kkt=lambda rho, m, k: kkt_weights_exp(rho),
            dual=_entropy_dual_exp,
        ),
        "logistic": LossSpec(
            loss_id="logistic",
            conjugate="binary-entropy",
            primal=lambda w, rows, nu, m, k: logistic_mean_objective(w, rows, nu, 1.0 / (m * k)),
            kkt=kkt_weights_logistic,
            dual=_entropy_dual_logistic,
        ),
    }


def get_loss(loss_id: str) -> LossSpec:
    table = conjugate_loss_table()
    if loss_id not in table:
        raise ValueError(f"unknown loss id {loss_id!r}; known: {sorted(table)}")
    return table[loss_id]
