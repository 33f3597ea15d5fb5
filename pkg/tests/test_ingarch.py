import numpy as np
import pytest

from dpcpt.exceptions import DataError, DimensionError, UnsupportedModel
from dpcpt.ingarch import (
    DELTA_L,
    LINEAR,
    CustomModel,
    as_counts,
    intensity_and_gradient_filter,
    intensity_filter,
    simulate,
    stationary_mean,
    validate_params,
)


def reference_filter(theta, x, lam1):
    """Plain-Python recursion used as an independent oracle."""
    w, a, b = theta
    lam = [lam1]
    for t in range(1, len(x)):
        lam.append(w + a * lam[-1] + b * x[t - 1])
    return np.array(lam)


def random_instance(rng, n=60):
    a = rng.uniform(0, 0.6)
    b = rng.uniform(0, 0.98 - a)
    theta = np.array([rng.uniform(0.2, 5), a, b])
    x = rng.poisson(rng.uniform(0.5, 15), n)
    return theta, x, rng.uniform(0.1, 10)


class TestValidation:
    def test_valid(self):
        assert validate_params(LINEAR, (2, 0.1, 0.2)).ok

    def test_nonstationary(self):
        report = validate_params(LINEAR, (2, 0.5, 0.6))
        assert not report.ok
        assert report.violations == ("a+b > 1-delta_S",)

    def test_zero_intercept(self):
        assert validate_params(LINEAR, (0, 0.1, 0.2)).violations == ("w < delta_L",)

    def test_negative_coefficients_each_named(self):
        report = validate_params(LINEAR, (1, -0.1, -0.2))
        assert set(report.violations) == {"a < 0", "b < 0"}

    def test_contraction_margin_is_inclusive(self):
        assert validate_params(LINEAR, (1, 0.5, 0.499)).ok
        assert not validate_params(LINEAR, (1, 0.5, 0.4995)).ok

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionError):
            validate_params(LINEAR, (1, 0.1))


class TestIntensityFilter:
    def test_first_step_from_zero_start(self):
        path = intensity_filter(LINEAR, (2, 0.1, 0.2), [3, 1], 0.0)
        assert path.lambda1 == DELTA_L
        assert path.lam[1] == pytest.approx(2 + 0.1 * DELTA_L + 0.6, abs=1e-12)

    def test_no_feedback_is_constant(self):
        path = intensity_filter(LINEAR, (2, 0, 0), [0, 5, 9, 1], 2.0)
        np.testing.assert_array_equal(path.lam, [2.0, 2.0, 2.0, 2.0])

    def test_hand_iterated(self):
        path = intensity_filter(LINEAR, (1, 0.5, 0.3), [4, 2, 5], 1.0)
        np.testing.assert_allclose(path.lam, [1.0, 2.7, 2.95], rtol=1e-14)

    def test_matches_reference_recursion(self, rng):
        for _ in range(20):
            theta, x, lam1 = random_instance(rng)
            np.testing.assert_allclose(
                intensity_filter(LINEAR, theta, x, lam1).lam, reference_filter(theta, x, lam1), rtol=1e-13
            )

    def test_lower_bound_after_first_step(self, rng):
        for _ in range(20):
            theta, x, _ = random_instance(rng)
            lam = intensity_filter(LINEAR, theta, x, 0.0).lam
            assert np.all(lam[1:] >= theta[0])

    def test_start_value_forgotten_geometrically(self, rng):
        theta, x, _ = random_instance(rng, n=40)
        l0 = intensity_filter(LINEAR, theta, x, 0.0).lam
        l10 = intensity_filter(LINEAR, theta, x, 10.0).lam
        bound = 10.0 * theta[1] ** np.arange(x.size)
        assert np.all(np.abs(l10 - l0) <= bound + 1e-12)

    def test_rejects_bad_counts(self):
        for bad in ([], [1, -1], [1.5, 2], [[1, 2]], [1, np.nan]):
            with pytest.raises(DataError):
                as_counts(bad)


class TestGradientFilter:
    def test_first_gradient_entries(self):
        path = intensity_and_gradient_filter(LINEAR, (2, 0.1, 0.2), [3, 1, 0], 0.0)
        np.testing.assert_array_equal(path.grad[0], [0, 0, 0])
        np.testing.assert_allclose(path.grad[1], [1, DELTA_L, 3], atol=1e-15)

    def test_no_feedback(self):
        x = np.array([4, 0, 7, 2])
        path = intensity_and_gradient_filter(LINEAR, (2, 0, 0), x, 2.0)
        expected = np.column_stack([np.ones(3), path.lam[:-1], x[:-1]])
        np.testing.assert_array_equal(path.grad[1:], expected)

    def test_matches_finite_differences(self, rng):
        for _ in range(100):
            theta, x, lam1 = random_instance(rng, n=40)
            grad = intensity_and_gradient_filter(LINEAR, theta, x, lam1).grad
            for i in range(3):
                h = 1e-6 * max(1.0, abs(theta[i]))
                tp, tm = theta.copy(), theta.copy()
                tp[i] += h
                tm[i] -= h
                fd = (reference_filter(tp, x, lam1) - reference_filter(tm, x, lam1)) / (2 * h)
                np.testing.assert_allclose(grad[:, i], fd, rtol=1e-6, atol=1e-9)


class TestSimulate:
    def test_iid_mean(self):
        x, lam = simulate(LINEAR, (2, 0, 0), 100_000, 1000, seed=1)
        assert abs(x.mean() - 2.0) < 0.03
        np.testing.assert_array_equal(lam, 2.0)

    def test_stationary_mean(self):
        x, _ = simulate(LINEAR, (2, 0.1, 0.2), 100_000, 1000, seed=2)
        assert abs(x.mean() - 2 / 0.7) < 0.05

    def test_deterministic(self):
        a = simulate(LINEAR, (2, 0.1, 0.2), 200, 50, seed=9)
        b = simulate(LINEAR, (2, 0.1, 0.2), 200, 50, seed=9)
        np.testing.assert_array_equal(a[0], b[0])
        np.testing.assert_array_equal(a[1], b[1])

    def test_counts_and_recursion(self):
        x, lam = simulate(LINEAR, (1.5, 0.3, 0.4), 300, 100, seed=3)
        assert x.dtype == np.int64 and x.min() >= 0
        np.testing.assert_allclose(lam[1:], 1.5 + 0.3 * lam[:-1] + 0.4 * x[:-1], rtol=1e-14)

    def test_first_draw_from_clamped_zero_intensity(self):
        x, lam = simulate(LINEAR, (2, 0.1, 0.2), 1, 0, seed=0)
        assert lam[0] == DELTA_L
        assert x[0] == np.random.default_rng(0).poisson(DELTA_L)

    def test_change_point_continues_recursion(self):
        n = 200
        x, lam = simulate(LINEAR, (2, 0.1, 0.2), n, 100, seed=4, theta1=(2, 0.1, 0.4))
        k = n // 2
        np.testing.assert_allclose(lam[1:k], 2 + 0.1 * lam[: k - 1] + 0.2 * x[: k - 1], rtol=1e-14)
        np.testing.assert_allclose(lam[k:], 2 + 0.1 * lam[k - 1 : -1] + 0.4 * x[k - 1 : -1], rtol=1e-14)

    def test_invalid_parameters_rejected(self):
        with pytest.raises(ValueError):
            simulate(LINEAR, (2, 0.5, 0.6), 10)


class TestStationaryMean:
    @pytest.mark.parametrize(
        "theta, expected", [((2, 0.1, 0.2), 2.857142857142857), ((2, 0, 0), 2.0), ((2, 0.1, 0.7), 10.0)]
    )
    def test_values(self, theta, expected):
        assert stationary_mean(theta) == pytest.approx(expected, rel=1e-12)

    def test_custom_model_unsupported(self):
        with pytest.raises(UnsupportedModel):
            stationary_mean((2, 0.1, 0.2), model=linear_as_custom())


def linear_as_custom():
    return CustomModel(
        link_fn=lambda th, lam, x: th[0] + th[1] * lam + th[2] * x,
        dlink_dtheta=lambda th, lam, x: np.array([1.0, lam, x]),
        dlink_dlambda=lambda th, lam, x: th[1],
        contraction_fn=lambda th: th[1] + th[2],
        dim=3,
        box=lambda x: LINEAR.default_box(x),
    )


class TestCustomModel:
    def test_reproduces_linear_filters(self, rng):
        custom = linear_as_custom()
        theta, x, lam1 = random_instance(rng)
        a = intensity_and_gradient_filter(LINEAR, theta, x, lam1)
        b = intensity_and_gradient_filter(custom, theta, x, lam1)
        np.testing.assert_allclose(a.lam, b.lam, rtol=1e-13)
        np.testing.assert_allclose(a.grad, b.grad, rtol=1e-12, atol=1e-14)

    def test_contraction_checked(self):
        assert not validate_params(linear_as_custom(), (1, 0.6, 0.6)).ok

    def test_simulation_matches_linear(self):
        a = simulate(LINEAR, (2, 0.1, 0.2), 100, 20, seed=5)
        b = simulate(linear_as_custom(), (2, 0.1, 0.2), 100, 20, seed=5)
        np.testing.assert_array_equal(a[0], b[0])
