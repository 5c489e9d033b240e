import dataclasses
import warnings
from itertools import permutations

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from psda.errors import (
    DegenerateSpectrumWarning,
    DimensionMismatchError,
    NonFiniteInputError,
    WeightSumError,
    ZeroMassMarginalError,
    ZeroVectorError,
)
from psda.otreg import (
    LossBreakdown,
    OtParams,
    affinity_regularization,
    compose_reg,
    compose_total,
    cost_matrix,
    distance_shrinkage_gradient,
    distance_shrinkage_loss,
    eig_shrinkage_gradient,
    eig_shrinkage_loss,
    ot_loss,
    ot_loss_gradient,
    pairwise_distances,
    procrustes_map,
    sinkhorn,
)


def central_fd(f, x, step=1e-5):
    """Central finite differences of a scalar function over an array."""
    grad = np.zeros_like(x, dtype=np.float64)
    for idx in np.ndindex(x.shape):
        hi = x.copy()
        lo = x.copy()
        hi[idx] += step
        lo[idx] -= step
        grad[idx] = (f(hi) - f(lo)) / (2.0 * step)
    return grad


def rel_error(approx, exact):
    scale = max(float(np.linalg.norm(exact)), 1e-12)
    return float(np.linalg.norm(approx - exact)) / scale


def brute_force_lp(cost):
    """Exact uniform-marginal transport cost of a square instance.

    With uniform marginals the optimum sits at a permutation matrix
    scaled by 1/n, so enumerating all n! assignments is exact.
    """
    n = cost.shape[0]
    best = min(sum(cost[i, p[i]] for i in range(n)) for p in permutations(range(n)))
    return best / n


def mpmath_sinkhorn_2x2(epsilon, iterations=400):
    """50-digit scaling iteration for C=[[0,1],[1,0]], uniform marginals."""
    with mpmath.workdps(50):
        eps = mpmath.mpf(repr(epsilon))
        k = [[mpmath.e ** (mpmath.mpf(-c) / eps) for c in row] for row in ((0, 1), (1, 0))]
        half = mpmath.mpf(1) / 2
        u = [mpmath.mpf(1), mpmath.mpf(1)]
        v = [mpmath.mpf(1), mpmath.mpf(1)]
        for _ in range(iterations):
            u = [half / (k[i][0] * v[0] + k[i][1] * v[1]) for i in range(2)]
            v = [half / (k[0][j] * u[0] + k[1][j] * u[1]) for j in range(2)]
        plan = [[u[i] * k[i][j] * v[j] for j in range(2)] for i in range(2)]
        loss = plan[0][1] + plan[1][0]
        return np.array([[float(p) for p in row] for row in plan]), float(loss)


def closed_form_2x2(epsilon):
    """Symmetry of the instance forces P = [[p, 1/2-p], [1/2-p, p]] with
    off/on ratio e^(-1/eps), hence p = (1/2) / (1 + e^(-1/eps))."""
    with mpmath.workdps(50):
        p = (mpmath.mpf(1) / 2) / (1 + mpmath.e ** (-1 / mpmath.mpf(repr(epsilon))))
        return float(p), float(2 * (mpmath.mpf(1) / 2 - p))


class TestPairwiseDistances:
    def test_matches_double_loop(self):
        rng = np.random.default_rng(0)
        x = rng.normal(size=(4, 8))
        y = rng.normal(size=(6, 8))
        dist = pairwise_distances(x, y)
        for i in range(4):
            for j in range(6):
                assert abs(dist[i, j] - np.linalg.norm(x[i] - y[j])) <= 1e-12

    def test_identical_rows_give_exact_zero(self):
        rng = np.random.default_rng(1)
        x = rng.normal(size=(5, 3))
        dist = pairwise_distances(x, x)
        assert np.all(np.diag(dist) == 0.0)

    def test_dim_mismatch(self):
        with pytest.raises(DimensionMismatchError):
            pairwise_distances(np.zeros((2, 3)), np.zeros((2, 4)))

    def test_requires_2d(self):
        with pytest.raises(ValueError):
            pairwise_distances(np.zeros(3), np.zeros((2, 3)))


class TestCostMatrix:
    def test_single_pair(self):
        cost = cost_matrix(np.array([[0.0, 0.0]]), np.array([[3.0, 4.0]]))
        assert cost.shape == (1, 1)
        assert cost[0, 0] == 5.0

    def test_matches_double_loop(self):
        rng = np.random.default_rng(2)
        orig = rng.normal(size=(4, 8))
        aug = rng.normal(size=(4, 8))
        cost = cost_matrix(orig, aug)
        for i in range(4):
            for j in range(4):
                assert abs(cost[i, j] - np.linalg.norm(orig[i] - aug[j])) <= 1e-12

    def test_identical_clouds_zero_diagonal(self):
        rng = np.random.default_rng(3)
        x = rng.normal(size=(5, 4))
        assert np.all(np.diag(cost_matrix(x, x.copy())) == 0.0)

    def test_power_two_squares_distances(self):
        rng = np.random.default_rng(4)
        orig = rng.normal(size=(3, 3))
        aug = rng.normal(size=(3, 3))
        c1 = cost_matrix(orig, aug, power=1.0)
        c2 = cost_matrix(orig, aug, power=2.0)
        assert np.max(np.abs(c2 - c1**2)) <= 1e-12

    def test_rejects_bad_inputs(self):
        x = np.zeros((2, 2))
        with pytest.raises(ValueError):
            cost_matrix(x, x, power=0.0)
        with pytest.raises(DimensionMismatchError):
            cost_matrix(np.zeros((2, 2)), np.zeros((3, 2)))
        with pytest.raises(NonFiniteInputError):
            cost_matrix(np.array([[np.nan, 0.0]]), np.zeros((1, 2)))


class TestSinkhorn:
    def test_single_zero_cost_cell(self):
        plan = sinkhorn(np.array([[0.0]]), epsilon=0.1)
        assert plan.plan[0, 0] == 1.0
        assert plan.converged
        assert ot_loss(plan, np.array([[0.0]])) == 0.0

    def test_two_by_two_closed_form(self):
        cost = np.array([[0.0, 1.0], [1.0, 0.0]])
        result = sinkhorn(cost, epsilon=0.1, max_iter=10000, tol=1e-12)
        assert result.converged
        oracle_plan, oracle_loss = mpmath_sinkhorn_2x2(0.1)
        p, loss = closed_form_2x2(0.1)
        # the scaling iteration and the closed form agree to far beyond
        # double precision; both pin the implementation
        assert abs(oracle_plan[0, 0] - p) <= 1e-15
        assert abs(oracle_loss - loss) <= 1e-15
        assert np.max(np.abs(result.plan - oracle_plan)) <= 1e-8
        assert abs(ot_loss(result, cost) - oracle_loss) <= 1e-8

    def test_feasibility_and_scaling_identity(self):
        rng = np.random.default_rng(5)
        cost = rng.uniform(size=(5, 7))
        a = rng.uniform(0.1, 1.0, 5)
        a /= a.sum()
        b = rng.uniform(0.1, 1.0, 7)
        b /= b.sum()
        result = sinkhorn(cost, epsilon=0.2, a=a, b=b, max_iter=5000, tol=1e-10)
        assert result.converged
        assert np.max(np.abs(result.plan.sum(axis=1) - a)) <= 1e-9
        assert np.max(np.abs(result.plan.sum(axis=0) - b)) <= 1e-9
        rebuilt = result.u[:, None] * result.kernel * result.v[None, :]
        assert np.max(np.abs(rebuilt - result.plan)) <= 1e-10
        assert np.all(result.plan >= 0.0) and np.all(result.plan <= 1.0)
        assert result.marginal_error <= 1e-10
        assert not result.log_domain

    def test_zero_marginal_entry_is_fine(self):
        cost = np.array([[0.3, 0.7, 0.2], [0.6, 0.1, 0.5], [0.4, 0.9, 0.8]])
        a = np.array([0.5, 0.5, 0.0])
        result = sinkhorn(cost, epsilon=0.5, a=a, max_iter=5000, tol=1e-10)
        assert result.converged
        assert np.max(np.abs(result.plan[2])) <= 1e-12

    def test_non_convergence_is_flagged_not_raised(self):
        rng = np.random.default_rng(6)
        cost = rng.uniform(0.2, 1.0, size=(6, 6))
        result = sinkhorn(cost, epsilon=0.01, max_iter=3, tol=1e-12)
        assert not result.converged
        assert result.iterations_used == 3
        assert result.marginal_error > 1e-12

    def test_zero_iterations_allowed(self):
        cost = np.array([[0.0, 1.0], [1.0, 0.0]])
        result = sinkhorn(cost, epsilon=0.1, max_iter=0)
        assert result.iterations_used == 0
        assert not result.converged

    def test_underflow_falls_back_to_log_domain(self):
        cost = np.array([[5000.0, 6000.0], [7000.0, 5000.0]])
        result = sinkhorn(cost, epsilon=0.1, max_iter=500, tol=1e-9)
        assert result.log_domain
        assert result.converged
        assert np.max(np.abs(result.plan - np.diag([0.5, 0.5]))) <= 1e-6

    def test_underflow_with_fallback_disabled_raises(self):
        cost = np.array([[5000.0, 6000.0], [7000.0, 5000.0]])
        with pytest.raises(FloatingPointError):
            sinkhorn(cost, epsilon=0.1, log_domain=False)

    def test_forced_log_domain_matches_plain(self):
        rng = np.random.default_rng(7)
        cost = rng.uniform(size=(4, 4))
        plain = sinkhorn(cost, epsilon=0.5, max_iter=5000, tol=1e-11)
        logd = sinkhorn(cost, epsilon=0.5, max_iter=5000, tol=1e-11, log_domain=True)
        assert plain.converged and logd.converged
        assert logd.log_domain
        assert np.max(np.abs(plain.plan - logd.plan)) <= 1e-8
        rebuilt = logd.u[:, None] * logd.kernel * logd.v[None, :]
        assert np.max(np.abs(rebuilt - logd.plan)) <= 1e-10

    def test_deterministic(self):
        rng = np.random.default_rng(8)
        cost = rng.uniform(size=(3, 5))
        a = sinkhorn(cost, epsilon=0.3)
        b = sinkhorn(cost, epsilon=0.3)
        assert np.array_equal(a.plan, b.plan)

    def test_marginal_validation(self):
        cost = np.ones((2, 2))
        with pytest.raises(ValueError):
            sinkhorn(cost, epsilon=0.1, a=np.array([0.7, 0.2]))
        with pytest.raises(ValueError):
            sinkhorn(cost, epsilon=0.1, a=np.array([1.5, -0.5]))
        with pytest.raises(ZeroMassMarginalError):
            sinkhorn(cost, epsilon=0.1, a=np.array([0.0, 0.0]))
        with pytest.raises(ValueError):
            sinkhorn(cost, epsilon=0.1, b=np.array([1.0]))
        with pytest.raises(NonFiniteInputError):
            sinkhorn(cost, epsilon=0.1, a=np.array([np.inf, 0.0]))

    def test_cost_validation(self):
        with pytest.raises(ValueError):
            sinkhorn(np.array([[-1.0]]), epsilon=0.1)
        with pytest.raises(ValueError):
            sinkhorn(np.zeros((0, 2)), epsilon=0.1)
        with pytest.raises(NonFiniteInputError):
            sinkhorn(np.array([[np.inf]]), epsilon=0.1)
        with pytest.raises(ValueError):
            sinkhorn(np.ones((2, 2)), epsilon=0.0)
        with pytest.raises(ValueError):
            sinkhorn(np.ones((2, 2)), epsilon=0.1, max_iter=-1)


class TestEntropicLimits:
    @pytest.mark.parametrize("seed", [0, 1, 2])
    def test_epsilon_monotone_and_near_lp(self, seed):
        rng = np.random.default_rng(seed)
        orig = rng.normal(size=(4, 3)) * 3.0
        aug = rng.normal(size=(4, 3)) * 3.0
        cost = cost_matrix(orig, aug)
        lp = brute_force_lp(cost)
        losses = []
        slacks = []
        for eps in (0.001, 0.01, 0.1, 1.0):
            result = sinkhorn(cost, epsilon=eps, max_iter=60000, tol=1e-10)
            # epsilon far below the cost scale leaves a residual marginal
            # deficit shrinking like 1/iterations, so the plan may miss
            # full convergence; it must still be nearly feasible, and the
            # loss error is bounded by misplaced mass times the top cost
            assert result.marginal_error <= 1e-5
            losses.append(ot_loss(result, cost))
            slacks.append(4.0 * float(cost.max()) * result.marginal_error)
        for i in range(len(losses) - 1):
            assert losses[i + 1] >= losses[i] - (slacks[i] + slacks[i + 1])
        for loss, slack in zip(losses, slacks):
            assert loss >= lp - slack
        assert abs(losses[0] - lp) <= 0.01 * lp


class TestOtLoss:
    def test_manual_sum(self):
        plan = np.array([[0.3, 0.2], [0.1, 0.4]])
        cost = np.array([[1.0, 2.0], [3.0, 4.0]])
        assert ot_loss(plan, cost) == pytest.approx(2.6, abs=1e-15)

    def test_shape_mismatch(self):
        with pytest.raises(DimensionMismatchError):
            ot_loss(np.ones((2, 2)) / 4, np.ones((2, 3)))


class TestOtLossGradient:
    @pytest.mark.parametrize("seed", range(5))
    def test_matches_finite_differences(self, seed):
        rng = np.random.default_rng(seed)
        orig = rng.normal(size=(3, 4))
        aug = rng.normal(size=(3, 4))
        plan = sinkhorn(cost_matrix(orig, aug), epsilon=0.5, max_iter=5000, tol=1e-11)
        assert plan.converged
        grad = ot_loss_gradient(orig, aug, plan)
        fd = central_fd(lambda x: ot_loss(plan.plan, cost_matrix(orig, x)), aug)
        assert rel_error(fd, grad) <= 1e-5

    @pytest.mark.parametrize("seed", range(3))
    def test_power_two_matches_finite_differences(self, seed):
        rng = np.random.default_rng(seed + 10)
        orig = rng.normal(size=(3, 4))
        aug = rng.normal(size=(3, 4))
        plan = sinkhorn(cost_matrix(orig, aug, power=2.0), epsilon=0.5, max_iter=5000, tol=1e-11)
        grad = ot_loss_gradient(orig, aug, plan, power=2.0)
        fd = central_fd(lambda x: ot_loss(plan.plan, cost_matrix(orig, x, power=2.0)), aug)
        assert rel_error(fd, grad) <= 1e-5

    def test_zero_distance_pairs_contribute_nothing(self):
        orig = np.array([[0.0, 0.0], [1.0, 1.0]])
        plan = np.eye(2) / 2.0
        grad = ot_loss_gradient(orig, orig.copy(), plan)
        assert np.array_equal(grad, np.zeros((2, 2)))

    def test_plan_shape_mismatch(self):
        with pytest.raises(DimensionMismatchError):
            ot_loss_gradient(np.zeros((3, 2)), np.zeros((4, 2)), np.ones((3, 3)) / 9)


class TestProcrustes:
    def test_identity_on_identical_clouds(self):
        rng = np.random.default_rng(0)
        x = rng.normal(size=(6, 3))
        w, s, u, vt = procrustes_map(x, x.copy())
        assert np.max(np.abs(w - np.eye(3))) <= 1e-10
        assert np.all(np.diff(s) <= 0)

    @pytest.mark.parametrize("seed", range(5))
    @pytest.mark.parametrize("scale", [1.0, 2.0, 10.0])
    def test_recovers_rotation(self, seed, scale):
        rng = np.random.default_rng(seed)
        rot, _ = np.linalg.qr(rng.normal(size=(4, 4)))
        orig = rng.normal(size=(8, 4))
        aug = scale * (orig @ rot)
        w, s, u, vt = procrustes_map(orig, aug)
        assert np.linalg.norm(aug @ w / scale - orig) <= 1e-8
        assert np.max(np.abs(w.T @ w - np.eye(4))) <= 1e-10
        assert np.all(np.diff(s) <= 0)

    def test_scale_invariant_map(self):
        rng = np.random.default_rng(9)
        orig = rng.normal(size=(7, 3))
        aug = rng.normal(size=(7, 3))
        w_base = procrustes_map(orig, aug)[0]
        for c in (0.5, 2.0, 10.0):
            assert np.max(np.abs(procrustes_map(orig, c * aug)[0] - w_base)) <= 1e-10
            assert np.max(np.abs(procrustes_map(c * orig, aug)[0] - w_base)) <= 1e-10

    def test_shape_mismatch(self):
        with pytest.raises(DimensionMismatchError):
            procrustes_map(np.zeros((3, 2)), np.zeros((4, 2)))

    def test_non_finite(self):
        x = np.zeros((2, 2))
        bad = np.array([[np.nan, 0.0], [0.0, 0.0]])
        with pytest.raises(NonFiniteInputError):
            procrustes_map(x, bad)


class TestEigShrinkage:
    def test_unit_spectrum_value(self):
        with pytest.warns(DegenerateSpectrumWarning):
            loss = eig_shrinkage_loss(np.ones(5), 3, 0.001)
        assert loss == pytest.approx(-0.003, rel=1e-12)

    def test_default_tail_on_wide_spectrum(self):
        rng = np.random.default_rng(1)
        s = rng.uniform(0.5, 100.0, size=768)
        loss = eig_shrinkage_loss(s, 300, 0.001)
        oracle = -0.001 * sum(sorted(float(x) ** 2 for x in s)[:300])
        assert loss == pytest.approx(oracle, rel=1e-12)

    def test_tail_larger_than_spectrum_uses_all(self):
        s = np.array([3.0, 1.0, 2.0])
        assert eig_shrinkage_loss(s, 300, 0.5) == pytest.approx(-0.5 * 14.0, rel=1e-12)

    def test_matches_eigvalsh_oracle(self):
        rng = np.random.default_rng(2)
        orig = rng.normal(size=(4, 4))
        aug = rng.normal(size=(4, 4))
        _, s, _, _ = procrustes_map(orig, aug)
        m = aug.T @ orig
        eigvals = np.linalg.eigvalsh(m.T @ m)  # ascending
        oracle = -0.01 * (eigvals[0] + eigvals[1])
        assert abs(eig_shrinkage_loss(s, 2, 0.01) - oracle) <= 1e-10

    def test_near_tie_warns(self):
        with pytest.warns(DegenerateSpectrumWarning):
            eig_shrinkage_loss(np.array([1.0, 1.0 + 5e-9, 2.0]), 2, 0.1)

    def test_clear_gaps_do_not_warn(self):
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            eig_shrinkage_loss(np.array([1.0, 2.0, 3.0]), 3, 0.1)

    def test_tail_of_one_never_warns(self):
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            eig_shrinkage_loss(np.ones(4), 1, 0.1)

    def test_validation(self):
        with pytest.raises(ValueError):
            eig_shrinkage_loss(np.array([]), 1, 0.1)
        with pytest.raises(ValueError):
            eig_shrinkage_loss(np.ones(3), 0, 0.1)
        with pytest.raises(ValueError):
            eig_shrinkage_loss(np.ones((2, 2)), 1, 0.1)

    @pytest.mark.parametrize("seed", range(3))
    def test_gradient_matches_finite_differences(self, seed):
        rng = np.random.default_rng(seed + 20)
        orig = rng.normal(size=(6, 4))
        aug = rng.normal(size=(6, 4))
        _, s, u, vt = procrustes_map(orig, aug)
        grad = eig_shrinkage_gradient(orig, u, vt, s, 2, 0.05)

        def full_loss(x):
            return eig_shrinkage_loss(procrustes_map(orig, x)[1], 2, 0.05)

        fd = central_fd(full_loss, aug)
        assert rel_error(fd, grad) <= 1e-4


class TestDistanceShrinkage:
    def test_identical_clouds_exactly_zero(self):
        rng = np.random.default_rng(3)
        x = rng.normal(size=(4, 5))
        assert distance_shrinkage_loss(x, x.copy()) == 0.0

    def test_scaled_parallel_is_numerically_zero(self):
        rng = np.random.default_rng(4)
        x = rng.normal(size=(4, 5))
        assert 0.0 <= distance_shrinkage_loss(x, 3.0 * x) <= 5e-16

    def test_orthogonal_pools(self):
        orig = np.array([[1.0, 0.0], [1.0, 0.0]])
        aug = np.array([[0.0, 1.0], [0.0, 1.0]])
        assert distance_shrinkage_loss(orig, aug) == 1.0

    def test_forty_five_degrees(self):
        orig = np.array([[1.0, 0.0]])
        aug = np.array([[1.0, 1.0]])
        assert distance_shrinkage_loss(orig, aug) == pytest.approx(
            1.0 - 2.0**-0.5, abs=1e-12
        )

    def test_opposite_pools(self):
        assert distance_shrinkage_loss(np.array([[1.0, 0.0]]), np.array([[-1.0, 0.0]])) == 2.0

    def test_non_parallel_is_positive(self):
        # 1e-6 keeps 1 - cos(theta) ~ 5e-13, safely above double rounding
        orig = np.array([[1.0, 0.0]])
        aug = np.array([[1.0, 1e-6]])
        assert distance_shrinkage_loss(orig, aug) > 0.0

    def test_zero_pool_rejected(self):
        zero_mean = np.array([[1.0, 0.0], [-1.0, 0.0]])
        other = np.ones((2, 2))
        with pytest.raises(ZeroVectorError):
            distance_shrinkage_loss(zero_mean, other)
        with pytest.raises(ZeroVectorError):
            distance_shrinkage_loss(other, zero_mean)
        with pytest.raises(ZeroVectorError):
            distance_shrinkage_gradient(other, zero_mean)

    @pytest.mark.parametrize("seed", range(4))
    def test_gradient_matches_finite_differences(self, seed):
        rng = np.random.default_rng(seed + 30)
        orig = rng.normal(size=(4, 3)) + 1.0
        aug = rng.normal(size=(4, 3)) + 1.0
        grad = distance_shrinkage_gradient(orig, aug)
        fd = central_fd(lambda x: distance_shrinkage_loss(orig, x), aug)
        assert rel_error(fd, grad) <= 1e-5

    def test_gradient_rows_identical(self):
        rng = np.random.default_rng(5)
        orig = rng.normal(size=(5, 3)) + 1.0
        aug = rng.normal(size=(5, 3)) + 1.0
        grad = distance_shrinkage_gradient(orig, aug)
        assert all(np.array_equal(grad[0], row) for row in grad)


class TestCompose:
    def test_projections(self):
        assert compose_reg(2.0, 5.0, 7.0, (1.0, 0.0, 0.0)) == 2.0
        assert compose_reg(2.0, 5.0, 7.0, (0.0, 1.0, 0.0)) == 5.0
        assert compose_reg(2.0, 5.0, 7.0, (0.0, 0.0, 1.0)) == 7.0

    def test_zero_losses(self):
        assert compose_reg(0.0, 0.0, 0.0, (0.4, 0.2, 0.4)) == 0.0

    def test_default_blend(self):
        assert compose_reg(2.0, 5.0, 7.0, (0.4, 0.2, 0.4)) == pytest.approx(4.6, abs=1e-14)

    def test_total_projections(self):
        assert compose_total(9.0, 3.0, (0.0, 1.0)) == 3.0
        assert compose_total(9.0, 3.0, (1.0, 0.0)) == 9.0

    def test_total_fixed_point_at_even_split(self):
        value = 0.7342
        assert compose_total(value, value, (0.5, 0.5)) == value
        assert compose_total(value, value, (0.3, 0.7)) == pytest.approx(value, rel=1e-15)

    def test_weight_validation(self):
        with pytest.raises(WeightSumError):
            compose_reg(1.0, 1.0, 1.0, (0.5, 0.5))
        with pytest.raises(WeightSumError):
            compose_reg(1.0, 1.0, 1.0, (0.5, 0.3, 0.1))
        with pytest.raises(WeightSumError):
            compose_reg(1.0, 1.0, 1.0, (0.5, 0.6, -0.1))
        with pytest.raises(WeightSumError):
            compose_total(1.0, 1.0, (np.nan, 1.0))
        with pytest.raises(WeightSumError):
            compose_total(1.0, 1.0, (0.5, 0.5, 0.0))

    def test_sum_tolerance_accepted(self):
        assert compose_reg(1.0, 1.0, 1.0, (0.4 + 1e-10, 0.2, 0.4)) == pytest.approx(1.0)


class TestOtParams:
    def test_defaults(self):
        params = OtParams()
        assert params.epsilon == 0.1
        assert params.tail_count == 300
        assert params.eta == 0.001
        assert params.rho == (0.4, 0.2, 0.4)
        assert params.lam == (0.5, 0.5)
        assert params.power == 1.0
        assert params.max_iter == 1000
        assert params.tol == 1e-9

    def test_validation(self):
        with pytest.raises(WeightSumError):
            OtParams(rho=(0.5, 0.5, 0.5))
        with pytest.raises(WeightSumError):
            OtParams(lam=(0.9, 0.2))
        with pytest.raises(ValueError):
            OtParams(epsilon=0.0)
        with pytest.raises(ValueError):
            OtParams(eta=-0.1)
        with pytest.raises(ValueError):
            OtParams(tail_count=0)

    def test_frozen(self):
        with pytest.raises(dataclasses.FrozenInstanceError):
            OtParams().epsilon = 0.5


class TestAffinityRegularization:
    def test_identical_single_row(self):
        cloud = np.array([[3.0, 4.0]])
        out = affinity_regularization(cloud, cloud.copy())
        assert out.loss_ot == 0.0
        assert out.loss_dis == 0.0
        # cross-covariance [[9,12],[12,16]] has singular values 25 and 0
        assert out.loss_eig == pytest.approx(-0.001 * 625.0, rel=1e-10)
        assert out.loss_reg == 0.2 * out.loss_eig
        assert out.loss_total == 0.5 * out.loss_reg
        assert out.tail_count == 2
        assert out.sinkhorn_converged

    def test_identical_repeated_rows(self):
        cloud = np.tile(np.array([1.0, 2.0, 0.0]), (3, 1))
        with pytest.warns(DegenerateSpectrumWarning):
            out = affinity_regularization(cloud, cloud.copy())
        assert out.loss_ot == 0.0
        assert out.loss_dis == 0.0
        # M = 3 v v^T with ||v||^2 = 5: spectrum {15, 0, 0}
        assert out.loss_eig == pytest.approx(-0.001 * 225.0, rel=1e-10)
        assert out.loss_reg == pytest.approx(0.2 * out.loss_eig, rel=1e-12)

    def test_task_loss_blends_into_total(self):
        rng = np.random.default_rng(6)
        orig = rng.normal(size=(3, 4)) + 1.0
        aug = rng.normal(size=(3, 4)) + 1.0
        out = affinity_regularization(orig, aug, task_loss=2.0)
        assert out.task_loss == 2.0
        assert out.loss_total == pytest.approx(0.5 * 2.0 + 0.5 * out.loss_reg, rel=1e-15)

    def test_breakdown_composition(self):
        rng = np.random.default_rng(7)
        orig = rng.normal(size=(4, 3)) + 1.0
        aug = rng.normal(size=(4, 3)) + 1.0
        params = OtParams(rho=(0.3, 0.3, 0.4), lam=(0.25, 0.75))
        out = affinity_regularization(orig, aug, params, task_loss=1.5)
        blend = 0.3 * out.loss_ot + 0.3 * out.loss_eig + 0.4 * out.loss_dis
        assert out.loss_reg == pytest.approx(blend, rel=1e-14)
        assert out.loss_total == pytest.approx(0.25 * 1.5 + 0.75 * out.loss_reg, rel=1e-14)
        assert out.rho == (0.3, 0.3, 0.4)
        assert out.lam == (0.25, 0.75)

    @pytest.mark.parametrize("seed", range(20))
    def test_gradient_matches_finite_differences(self, seed):
        rng = np.random.default_rng(seed)
        orig = rng.normal(size=(6, 4))
        aug = rng.normal(size=(6, 4))
        params = OtParams(epsilon=0.5, eta=0.01, max_iter=5000, tol=1e-11)
        out = affinity_regularization(orig, aug, params)
        assert out.sinkhorn_converged

        plan = sinkhorn(
            cost_matrix(orig, aug, power=params.power),
            params.epsilon,
            max_iter=params.max_iter,
            tol=params.tol,
        )
        _, s, u, vt = procrustes_map(orig, aug)
        k = min(params.tail_count, s.size)
        idx = np.argsort(s)[:k]

        def reg_with_fixed_plan_and_factors(x):
            l_ot = ot_loss(plan.plan, cost_matrix(orig, x, power=params.power))
            tail = np.einsum("ir,ij,jr->r", u[:, idx], x.T @ orig, vt[idx, :].T)
            l_eig = -params.eta * float(np.sum(tail**2))
            l_dis = distance_shrinkage_loss(orig, x)
            return params.rho[0] * l_ot + params.rho[1] * l_eig + params.rho[2] * l_dis

        fd = central_fd(reg_with_fixed_plan_and_factors, aug)
        assert rel_error(fd, out.grad_augmented) <= 1e-4

    def test_shape_validation(self):
        with pytest.raises(DimensionMismatchError):
            affinity_regularization(np.ones((2, 2)), np.ones((3, 2)))
        with pytest.raises(ValueError):
            affinity_regularization(np.ones((0, 2)), np.ones((0, 2)))
        with pytest.raises(ValueError):
            affinity_regularization(np.ones(3), np.ones(3))

    def test_returns_breakdown(self):
        rng = np.random.default_rng(8)
        orig = rng.normal(size=(3, 5)) + 0.5
        # three points in five dimensions leave two zero singular values,
        # so the tail tie warning is part of the contract here
        with pytest.warns(DegenerateSpectrumWarning):
            out = affinity_regularization(orig, orig + rng.normal(size=(3, 5)) * 0.1)
        assert isinstance(out, LossBreakdown)
        assert out.grad_augmented.shape == (3, 5)
        assert out.singular_values.shape == (5,)
        assert out.alignment_map.shape == (5, 5)


@settings(deadline=None, max_examples=25)
@given(seed=st.integers(0, 2**31), n=st.integers(1, 5), m=st.integers(1, 6))
def test_sinkhorn_feasible_when_converged(seed, n, m):
    rng = np.random.default_rng(seed)
    cost = rng.uniform(0.0, 2.0, size=(n, m))
    result = sinkhorn(cost, epsilon=0.3, max_iter=20000, tol=1e-9)
    if result.converged:
        assert np.max(np.abs(result.plan.sum(axis=1) - 1.0 / n)) <= 1e-8
        assert np.max(np.abs(result.plan.sum(axis=0) - 1.0 / m)) <= 1e-8
    assert np.all(result.plan >= 0.0)
    assert np.all(result.plan <= 1.0 + 1e-12)


@settings(deadline=None, max_examples=25)
@given(seed=st.integers(0, 2**31), n=st.integers(1, 5), m=st.integers(1, 5))
def test_cost_matrix_swap_symmetry(seed, n, m):
    rng = np.random.default_rng(seed)
    x = rng.normal(size=(n, 3))
    y = rng.normal(size=(m, 3))
    assert np.array_equal(pairwise_distances(x, y), pairwise_distances(y, x).T)


@settings(deadline=None, max_examples=40)
@given(
    losses=st.tuples(*([st.floats(-5, 5)] * 3)),
    raw=st.tuples(*([st.floats(0.05, 1.0)] * 3)),
)
def test_compose_reg_stays_within_hull(losses, raw):
    total = sum(raw)
    rho = tuple(r / total for r in raw)
    blended = compose_reg(*losses, rho)
    assert min(losses) - 1e-9 <= blended <= max(losses) + 1e-9
