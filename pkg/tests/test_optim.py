"""Losses, gradients, KKT maps, duals, and the nonnegative minimizer."""

import numpy as np
import pytest
from scipy.special import expit, logsumexp, softmax

from projboost import optim
from projboost.errors import NumericError


def central_difference(f, w, h=1e-6):
    grad = np.empty_like(w)
    for j in range(w.size):
        e = np.zeros_like(w)
        e[j] = h
        grad[j] = (f(w + e) - f(w - e)) / (2.0 * h)
    return grad


def random_instance(gen, pairs=None, t=None):
    pairs = pairs or int(gen.integers(3, 40))
    t = t or int(gen.integers(1, 8))
    rows = gen.normal(size=(pairs, t))
    w = np.abs(gen.normal(size=t))
    return rows, w


class TestGradients:
    def test_exp_logsum_matches_finite_differences(self):
        gen = np.random.default_rng(0)
        for _ in range(25):
            rows, w = random_instance(gen)
            nu = float(np.abs(gen.normal())) * 0.1
            value, grad = optim.exp_logsum_objective(w, rows, nu)
            num = central_difference(
                lambda v: optim.exp_logsum_objective(v, rows, nu)[0], w)
            assert np.allclose(grad, num, rtol=1e-5, atol=1e-7)
            assert value == pytest.approx(
                float(logsumexp(-rows @ w)) + nu * w.sum())

    def test_logistic_mean_matches_finite_differences(self):
        gen = np.random.default_rng(1)
        for _ in range(25):
            rows, w = random_instance(gen)
            nu = float(np.abs(gen.normal())) * 0.1
            norm = 1.0 / rows.shape[0]
            _, grad = optim.logistic_mean_objective(w, rows, nu, norm)
            num = central_difference(
                lambda v: optim.logistic_mean_objective(v, rows, nu, norm)[0], w)
            assert np.allclose(grad, num, rtol=1e-5, atol=1e-7)

    def test_losses_stay_finite_at_extreme_margins(self):
        rows = np.array([[1000.0], [-1000.0]])
        w = np.array([1.0])
        value, grad = optim.exp_logsum_objective(w, rows, 0.01)
        assert np.isfinite(value) and np.all(np.isfinite(grad))
        value, grad = optim.logistic_mean_objective(w, rows, 0.01, 0.5)
        assert np.isfinite(value) and np.all(np.isfinite(grad))


class TestKkt:
    def test_exp_weights_are_softmax(self):
        rho = np.array([0.0, 1.0, -2.0])
        u = optim.kkt_weights_exp(rho)
        assert np.allclose(u, softmax(-rho))
        assert u.sum() == pytest.approx(1.0)
        assert np.all(u > 0.0)

    def test_logistic_weights_are_scaled_sigmoids(self):
        rho = np.array([0.0, 3.0, -3.0])
        u = optim.kkt_weights_logistic(rho, m=5, k=4)
        assert np.allclose(u, expit(-rho) / 20.0)
        assert np.all(u > 0.0)
        assert np.all(u < 1.0 / 20.0)

    def test_weights_are_negative_loss_gradients(self):
        # the dual variables equal -d(loss)/d(rho) at the current margins
        gen = np.random.default_rng(2)
        rho = gen.normal(size=12)
        h = 1e-6
        for j in range(12):
            e = np.zeros(12)
            e[j] = h
            exp_grad = (logsumexp(-(rho + e)) - logsumexp(-(rho - e))) / (2 * h)
            assert -exp_grad == pytest.approx(optim.kkt_weights_exp(rho)[j],
                                              rel=1e-4)
            lo = np.sum(np.logaddexp(0.0, -(rho + e))) / 48.0
            hi = np.sum(np.logaddexp(0.0, -(rho - e))) / 48.0
            assert -(lo - hi) / (2 * h) == pytest.approx(
                optim.kkt_weights_logistic(rho, 4, 12)[j], rel=1e-4)


class TestMinimizer:
    def quadratic(self, center):
        def objective(w):
            diff = w - center
            return float(diff @ diff), 2.0 * diff
        return objective

    def test_interior_quadratic(self):
        center = np.array([0.5, 2.0, 0.1])
        w = optim.minimize_bounded(self.quadratic(center), np.zeros(3))
        assert np.allclose(w, center, atol=1e-6)

    def test_active_bounds_clip_at_zero(self):
        center = np.array([-1.0, 3.0, -0.2])
        w = optim.minimize_bounded(self.quadratic(center), np.ones(3))
        assert np.allclose(w, [0.0, 3.0, 0.0], atol=1e-6)

    def test_grid_search_oracle_on_loss(self):
        # 2-coefficient logistic problem, compared against a fine grid
        gen = np.random.default_rng(3)
        rows = gen.normal(size=(30, 2))
        nu = 0.05
        objective = lambda w: optim.logistic_mean_objective(w, rows, nu, 1.0 / 30)
        w = optim.minimize_bounded(objective, np.zeros(2))
        grid = np.linspace(0.0, 3.0, 301)
        values = np.array([[objective(np.array([a, b]))[0] for b in grid]
                           for a in grid])
        assert objective(w)[0] <= values.min() + 1e-6

    def test_projected_gradient_small_at_solution(self):
        gen = np.random.default_rng(4)
        rows = gen.normal(size=(50, 5))
        objective = lambda w: optim.exp_logsum_objective(w, rows, 0.01)
        w = optim.minimize_bounded(objective, np.zeros(5))
        value, grad = objective(w)
        pg = optim.projected_gradient_norm(w, grad)
        assert pg <= 1e-6 * max(1.0, abs(value)) + 1e-9

    def test_deterministic(self):
        gen = np.random.default_rng(5)
        rows = gen.normal(size=(40, 4))
        objective = lambda w: optim.exp_logsum_objective(w, rows, 0.02)
        a = optim.minimize_bounded(objective, np.zeros(4))
        b = optim.minimize_bounded(objective, np.zeros(4))
        assert np.array_equal(a, b)

    def test_non_finite_start_rejected(self):
        def bad(w):
            return float("nan"), np.zeros_like(w)
        with pytest.raises(NumericError):
            optim.minimize_bounded(bad, np.zeros(2))

    def test_solver_spec_validation(self):
        with pytest.raises(ValueError):
            optim.SolverSpec(max_iterations=0)
        with pytest.raises(ValueError):
            optim.SolverSpec(convergence_factor=0.0)
        spec = optim.SolverSpec()
        assert spec.history_size == 5
        assert spec.line_search_tolerance == 1e-5


class TestDualTable:
    def test_registry_contents(self):
        table = optim.conjugate_loss_table()
        assert set(table) == {"exp", "logistic"}
        assert table["exp"].conjugate == "shannon-entropy"
        assert table["logistic"].conjugate == "binary-entropy"
        with pytest.raises(ValueError):
            optim.get_loss("hinge")

    def test_exp_dual_equals_primal_at_zero(self):
        # w = 0: uniform weights, entropy log(pairs), primal log(pairs)
        pairs = 17
        u = np.full(pairs, 1.0 / pairs)
        spec = optim.get_loss("exp")
        assert spec.dual(u, 1, pairs) == pytest.approx(np.log(pairs))
        value, _ = spec.primal(np.zeros(2), np.zeros((pairs, 2)), 0.1, 1, pairs)
        assert value == pytest.approx(np.log(pairs))

    def test_logistic_dual_equals_primal_at_zero(self):
        m, k = 6, 3
        pairs = m * (k - 1)
        u = np.full(pairs, 0.5 / (m * k))
        spec = optim.get_loss("logistic")
        value, _ = spec.primal(np.zeros(2), np.zeros((pairs, 2)), 0.1, m, k)
        assert spec.dual(u, m, k) == pytest.approx(value)

    def test_dual_gap_identity_at_kkt_weights(self):
        # with u from the KKT map, dual - primal = w . (A'u - nu); weak
        # duality dual <= primal then follows whenever u is dual-feasible
        gen = np.random.default_rng(6)
        for loss_id in ("exp", "logistic"):
            spec = optim.get_loss(loss_id)
            for _ in range(10):
                m, k = int(gen.integers(3, 10)), int(gen.integers(2, 5))
                nu = 0.1
                rows = gen.normal(size=(m * (k - 1), 3))
                w = np.abs(gen.normal(size=3))
                value, _ = spec.primal(w, rows, nu, m, k)
                u = spec.kkt(rows @ w, m, k)
                gap = spec.dual(u, m, k) - value
                assert gap == pytest.approx(float(w @ (rows.T @ u - nu)),
                                            abs=1e-10)
                if np.all(rows.T @ u <= nu):
                    assert spec.dual(u, m, k) <= value + 1e-10
