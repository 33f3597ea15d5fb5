import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import poisson

from dpcpt.divergence import (
    POWER_SUM_TOL,
    dp_loss_dlambda,
    dp_loss_term,
    objective,
    objective_and_gradient,
    poisson_power_sum,
    score_sequence,
)
from dpcpt.ingarch import LINEAR, intensity_and_gradient_filter, intensity_filter, simulate

mpmath.mp.dps = 40


def mp_power_sum(lam, alpha, terms=None):
    """High-precision brute-force sum of pmf**(1+alpha)."""
    lam = mpmath.mpf(lam)
    top = terms or int(lam + 40 * math.sqrt(lam) + 200)
    return mpmath.fsum(
        mpmath.exp((1 + alpha) * (-lam + y * mpmath.log(lam) - mpmath.loggamma(y + 1))) for y in range(top)
    )


def mp_loss(lam, x, alpha):
    lam = mpmath.mpf(lam)
    logpmf = -lam + x * mpmath.log(lam) - mpmath.loggamma(x + 1)
    if alpha == 0:
        return -logpmf
    return mp_power_sum(lam, alpha) - (1 + mpmath.mpf(1) / alpha) * mpmath.exp(alpha * logpmf)


class TestPowerSum:
    def test_alpha_zero_is_exactly_one(self):
        for lam in (1e-4, 0.5, 3.0, 250.0):
            assert poisson_power_sum(lam, 0.0) == 1.0

    def test_bessel_identity(self):
        oracle = float(mpmath.exp(-2) * mpmath.besseli(0, 2))
        assert oracle == pytest.approx(0.3085083, abs=5e-8)
        assert poisson_power_sum(1.0, 1.0) == pytest.approx(oracle, rel=1e-12)

    @pytest.mark.parametrize("lam", [1e-4, 0.5, 2.0, 10.0, 50.0, 400.0])
    @pytest.mark.parametrize("alpha", [0.1, 0.2, 0.5, 1.0])
    def test_matches_high_precision_sum(self, lam, alpha):
        assert poisson_power_sum(lam, alpha) == pytest.approx(float(mp_power_sum(lam, alpha)), rel=1e-11)

    def test_lambda_ten_alpha_half(self):
        value = poisson_power_sum(10.0, 0.5)
        assert 0 < value < 1
        assert value == pytest.approx(float(mp_power_sum(10.0, 0.5, terms=200)), rel=1e-12)

    @pytest.mark.parametrize("lam", [0.5, 2.0, 10.0, 50.0])
    def test_strictly_decreasing_in_alpha(self, lam):
        values = [poisson_power_sum(lam, a) for a in (0.0, 0.1, 0.2, 0.5, 1.0)]
        assert all(u > v for u, v in zip(values, values[1:]))
        assert all(0 < v <= 1 for v in values)

    def test_truncation_horizon(self):
        for lam in (0.5, 10.0, 80.0):
            for alpha in (0.1, 1.0):
                longer = float(mp_power_sum(lam, alpha, terms=int(lam + 12 * math.sqrt(lam) + 30) + 50))
                assert abs(poisson_power_sum(lam, alpha) - longer) < POWER_SUM_TOL


class TestLossTerm:
    def test_log_likelihood_branch(self):
        assert dp_loss_term(2.0, 1, 0.0) == pytest.approx(2 - math.log(2), rel=1e-14)
        assert dp_loss_term(2.0, 1, 0.0) == pytest.approx(1.3068528, abs=1e-7)

    def test_alpha_one_at_zero_count(self):
        oracle = float(mp_loss(1.0, 0, 1.0))
        assert oracle == pytest.approx(-0.42725056, abs=1e-8)
        assert dp_loss_term(1.0, 0, 1.0) == pytest.approx(oracle, rel=1e-12)

    @pytest.mark.parametrize("lam, x, alpha", [(0.3, 0, 0.1), (5.0, 5, 0.2), (12.0, 40, 0.5), (3.0, 1000, 1.0)])
    def test_matches_high_precision(self, lam, x, alpha):
        assert dp_loss_term(lam, x, alpha) == pytest.approx(float(mp_loss(lam, x, alpha)), rel=1e-11, abs=1e-300)

    def test_minimised_near_observation(self):
        grid = np.arange(0.1, 20.0, 0.001)
        values = dp_loss_term(grid, np.full(grid.size, 5), 0.2)
        assert abs(grid[np.argmin(values)] - 5.0) < 0.5

    def test_huge_outlier_is_finite(self):
        assert np.isfinite(dp_loss_term(2.0, 10**6, 0.5))
        assert np.isfinite(dp_loss_term(2.0, 10**6, 0.0))

    def test_vectorised_matches_scalar(self):
        lam = np.array([0.5, 2.0, 9.0])
        x = np.array([0, 3, 20])
        vec = dp_loss_term(lam, x, 0.3)
        assert vec.shape == (3,)
        for i in range(3):
            assert vec[i] == dp_loss_term(lam[i], int(x[i]), 0.3)


class TestLossDerivative:
    def test_score_zero_at_observation(self):
        assert dp_loss_dlambda(2.0, 2, 0.0) == 0.0

    def test_likelihood_score(self):
        assert dp_loss_dlambda(2.0, 1, 0.0) == pytest.approx(0.5, rel=1e-15)

    @settings(max_examples=200, deadline=None)
    @given(
        lam=st.floats(0.05, 60.0),
        x=st.integers(0, 120),
        alpha=st.sampled_from([0.0, 1e-4, 0.05, 0.1, 0.2, 0.3, 0.5, 1.0]),
    )
    def test_matches_finite_difference(self, lam, x, alpha):
        h = mpmath.mpf(lam) * mpmath.mpf("1e-12")
        analytic = dp_loss_dlambda(lam, x, alpha)
        # difference in 40-digit arithmetic: the loss is O(1/alpha) for small alpha
        up = mp_loss(mpmath.mpf(lam) + h, x, alpha)
        down = mp_loss(mpmath.mpf(lam) - h, x, alpha)
        fd = float((up - down) / (2 * h))
        assert analytic == pytest.approx(fd, rel=1e-6, abs=1e-12)

    @pytest.mark.parametrize("alpha", [0.2, 0.5, 1.0])
    def test_bounded_in_count_for_positive_alpha(self, alpha):
        x = np.arange(0, 10**6 + 1)
        values = np.abs(dp_loss_dlambda(np.full(x.size, 5.0), x, alpha))
        assert np.isfinite(values).all()
        assert int(np.argmax(values)) < 50
        assert values[-1] == pytest.approx(values[-1000])  # flat tail

    def test_linear_growth_for_likelihood(self):
        x = np.array([10, 100, 1000, 10**6])
        values = dp_loss_dlambda(np.full(x.size, 5.0), x, 0.0)
        np.testing.assert_allclose(values, 1 - x / 5.0)


def random_case(rng, n=80):
    a = rng.uniform(0, 0.5)
    b = rng.uniform(0, 0.95 - a)
    theta = np.array([rng.uniform(0.5, 4), a, b])
    x, _ = simulate(LINEAR, theta, n, 100, seed=int(rng.integers(1 << 31)))
    return theta, x, float(max(x.mean(), 0.5))


class TestObjective:
    def test_single_term(self):
        assert objective(LINEAR, (2, 0.1, 0.2), [1], 0.0, 2.0) == pytest.approx(1.3068528, abs=1e-7)

    def test_negative_log_likelihood(self, rng):
        for _ in range(20):
            theta, x, lam1 = random_case(rng)
            lam = intensity_filter(LINEAR, theta, x, lam1).lam
            assert objective(LINEAR, theta, x, 0.0, lam1) == pytest.approx(
                -poisson.logpmf(x, lam).sum(), rel=1e-12
            )

    def test_additive_over_time(self, rng):
        theta, x, lam1 = random_case(rng)
        lam = intensity_filter(LINEAR, theta, x, lam1).lam
        terms = [dp_loss_term(lam[t], int(x[t]), 0.3) for t in range(x.size)]
        assert objective(LINEAR, theta, x, 0.3, lam1) == pytest.approx(math.fsum(terms), rel=1e-12)

    def test_objective_and_gradient_agree(self, rng):
        theta, x, lam1 = random_case(rng)
        value, grad = objective_and_gradient(LINEAR, theta, x, 0.2, lam1)
        assert value == pytest.approx(objective(LINEAR, theta, x, 0.2, lam1), rel=1e-13)
        np.testing.assert_allclose(grad, score_sequence(LINEAR, theta, x, 0.2, lam1).sum(axis=0), rtol=1e-12)


class TestScoreSequence:
    def test_likelihood_score_terms(self, rng):
        for _ in range(20):
            theta, x, lam1 = random_case(rng)
            path = intensity_and_gradient_filter(LINEAR, theta, x, lam1)
            expected = (1 - x / path.lam)[:, None] * path.grad
            np.testing.assert_allclose(score_sequence(LINEAR, theta, x, 0.0, lam1), expected, rtol=1e-13, atol=1e-15)

    def test_sum_matches_finite_differences(self, rng):
        for alpha in (0.0, 0.1, 0.5, 1.0):
            theta, x, lam1 = random_case(rng)
            total = score_sequence(LINEAR, theta, x, alpha, lam1).sum(axis=0)
            for i in range(3):
                h = 1e-6 * max(1.0, abs(theta[i]))
                tp, tm = theta.copy(), theta.copy()
                tp[i] += h
                tm[i] -= h
                fd = (objective(LINEAR, tp, x, alpha, lam1) - objective(LINEAR, tm, x, alpha, lam1)) / (2 * h)
                assert total[i] == pytest.approx(fd, rel=1e-5, abs=1e-7)

    def test_continuous_at_alpha_zero(self, rng):
        for _ in range(10):
            theta, x, lam1 = random_case(rng)
            s0 = score_sequence(LINEAR, theta, x, 0.0, lam1)
            s1 = score_sequence(LINEAR, theta, x, 1e-4, lam1)
            assert np.linalg.norm(s1 - s0) <= 1e-2 * np.linalg.norm(s0)
