"""Poisson autoregressive (INGARCH) models.

A model maps the previous intensity and count to the next intensity,
``lambda_t = f_theta(lambda_{t-1}, X_{t-1})``, and the count is drawn as
``X_t | past ~ Poisson(lambda_t)``. The built-in :data:`LINEAR` model is the
INGARCH(1,1) link ``f = w + a*lambda + b*x``; :class:`CustomModel` wraps any
user-supplied positive link together with its partial derivatives.

Parameter vectors are plain 1-d float arrays. Count series are 1-d integer
arrays (see :func:`as_counts`).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Union

import numpy as np
from numba import njit

from dpcpt.exceptions import DataError, DimensionError, NumericalError, UnsupportedModel

DELTA_L = 1e-4
"""Lower bound on every intensity (positivity margin of the parameter space)."""

DELTA_S = 1e-3
"""Stationarity margin: the contraction coefficient must not exceed ``1 - DELTA_S``."""


def as_counts(x) -> np.ndarray:
    """Validate a count series and return it as an int64 array.

    Raises
    ------
    DataError
        If the series is empty, not one-dimensional, or contains negative,
        non-integer or non-finite values.
    """
    arr = np.asarray(x)
    if arr.ndim != 1 or arr.size == 0:
        raise DataError("count series must be a non-empty 1-d sequence")
    if arr.dtype.kind in "iu":
        out = arr.astype(np.int64)
    else:
        farr = arr.astype(float)
        if not np.all(np.isfinite(farr)) or np.any(farr != np.round(farr)):
            raise DataError("count series must contain integer values")
        out = farr.astype(np.int64)
    if np.any(out < 0):
        raise DataError("count series must be nonnegative")
    return out


@dataclass(frozen=True)
class ValidationReport:
    """Outcome of :func:`validate_params`; ``violations`` names each broken constraint."""

    violations: tuple[str, ...] = ()

    @property
    def ok(self) -> bool:
        return not self.violations

    def __bool__(self) -> bool:
        return self.ok


@dataclass(frozen=True)
class IntensityPath:
    """Filtered intensities and, optionally, their parameter gradients.

    ``lam[t]`` is the intensity for observation ``t`` (0-based) and
    ``grad[t]`` its derivative with respect to the parameter vector.
    """

    lam: np.ndarray
    grad: np.ndarray | None
    lambda1: float


class _ModelBase:
    """Shared recursion machinery; subclasses supply the link and its derivatives."""

    dim: int
    names: tuple[str, ...]
    delta_l: float
    delta_s: float

    def check_dim(self, theta) -> np.ndarray:
        theta = np.asarray(theta, dtype=float)
        if theta.ndim != 1 or theta.shape[0] != self.dim:
            raise DimensionError(
                f"expected a parameter vector of length {self.dim}, got shape {theta.shape}"
            )
        return theta

    def stationarity_margin(self, theta: np.ndarray) -> float:
        """``1 - delta_s - kappa(theta)``; nonnegative inside the parameter space."""
        return 1.0 - self.delta_s - self.contraction(theta)

    def filter(self, theta: np.ndarray, x: np.ndarray, lambda1: float) -> np.ndarray:
        n = x.shape[0]
        lam = np.empty(n)
        lam[0] = lambda1
        for t in range(1, n):
            lam[t] = self.link(theta, lam[t - 1], x[t - 1])
        return lam

    def filter_grad(
        self, theta: np.ndarray, x: np.ndarray, lambda1: float
    ) -> tuple[np.ndarray, np.ndarray]:
        n = x.shape[0]
        lam = np.empty(n)
        grad = np.zeros((n, self.dim))
        lam[0] = lambda1
        for t in range(1, n):
            lam[t] = self.link(theta, lam[t - 1], x[t - 1])
            dtheta, dlam = self.link_grad(theta, lam[t - 1], x[t - 1])
            grad[t] = dtheta + dlam * grad[t - 1]
        return lam, grad


@njit(cache=True)
def _linear_filter(w, a, b, x, lam1):
    n = x.shape[0]
    lam = np.empty(n)
    lam[0] = lam1
    for t in range(1, n):
        lam[t] = w + a * lam[t - 1] + b * x[t - 1]
    return lam


@njit(cache=True)
def _linear_filter_grad(w, a, b, x, lam1):
    n = x.shape[0]
    lam = np.empty(n)
    grad = np.zeros((n, 3))
    lam[0] = lam1
    for t in range(1, n):
        lp = lam[t - 1]
        xp = x[t - 1]
        lam[t] = w + a * lp + b * xp
        grad[t, 0] = 1.0 + a * grad[t - 1, 0]
        grad[t, 1] = lp + a * grad[t - 1, 1]
        grad[t, 2] = xp + a * grad[t - 1, 2]
    return lam, grad


@dataclass(frozen=True)
class LinearModel(_ModelBase):
    """INGARCH(1,1): ``lambda_t = w + a*lambda_{t-1} + b*X_{t-1}``, theta = (w, a, b)."""

    delta_l: float = DELTA_L
    delta_s: float = DELTA_S
    dim: int = field(default=3, init=False)
    names: tuple[str, ...] = field(default=("w", "a", "b"), init=False)

    def link(self, theta, lam, x):
        return theta[0] + theta[1] * lam + theta[2] * x

    def link_grad(self, theta, lam, x):
        return np.array([1.0, lam, float(x)]), theta[1]

    def contraction(self, theta) -> float:
        return float(theta[1] + theta[2])

    def violations(self, theta: np.ndarray) -> list[str]:
        w, a, b = theta
        out = []
        if w < self.delta_l:
            out.append("w < delta_L")
        if a < 0:
            out.append("a < 0")
        if b < 0:
            out.append("b < 0")
        if a + b > 1.0 - self.delta_s:
            out.append("a+b > 1-delta_S")
        return out

    def filter(self, theta, x, lambda1):
        return _linear_filter(theta[0], theta[1], theta[2], x.astype(np.float64), lambda1)

    def filter_grad(self, theta, x, lambda1):
        return _linear_filter_grad(theta[0], theta[1], theta[2], x.astype(np.float64), lambda1)

    def default_box(self, x: np.ndarray) -> np.ndarray:
        """Parameter box used when none is given: ``w`` up to ten times the sample mean."""
        upper_w = 10.0 * max(float(np.mean(x)), 1.0)
        hi = 1.0 - self.delta_s
        return np.array([[self.delta_l, upper_w], [0.0, hi], [0.0, hi]])


@dataclass(frozen=True)
class CustomModel(_ModelBase):
    """User-supplied link.

    The caller is responsible for positivity (``link >= delta_l``) and for
    the declared contraction bound; neither can be verified here beyond
    pointwise checks at the parameter values actually used.

    Parameters
    ----------
    link_fn : callable ``(theta, lam, x) -> float``
    dlink_dtheta : callable ``(theta, lam, x) -> ndarray`` of length ``dim``
    dlink_dlambda : callable ``(theta, lam, x) -> float``
    contraction_fn : callable ``theta -> float``, the Lipschitz constant kappa
    dim : parameter dimension
    box : callable ``x -> (dim, 2) array`` giving the default parameter box
    initializer : optional callable ``x -> theta`` used as the first optimizer start
    """

    link_fn: Callable
    dlink_dtheta: Callable
    dlink_dlambda: Callable
    contraction_fn: Callable
    dim: int
    box: Callable
    initializer: Callable | None = None
    names: tuple[str, ...] = ()
    delta_l: float = DELTA_L
    delta_s: float = DELTA_S

    def link(self, theta, lam, x):
        return self.link_fn(theta, lam, x)

    def link_grad(self, theta, lam, x):
        return np.asarray(self.dlink_dtheta(theta, lam, x), dtype=float), self.dlink_dlambda(
            theta, lam, x
        )

    def contraction(self, theta) -> float:
        return float(self.contraction_fn(theta))

    def violations(self, theta: np.ndarray) -> list[str]:
        if self.contraction(theta) > 1.0 - self.delta_s:
            return ["kappa > 1-delta_S"]
        return []

    def default_box(self, x: np.ndarray) -> np.ndarray:
        return np.asarray(self.box(x), dtype=float)


ModelSpec = Union[LinearModel, CustomModel]

LINEAR = LinearModel()


def validate_params(model: ModelSpec, theta) -> ValidationReport:
    """Check a parameter vector against positivity and contraction constraints.

    Raises
    ------
    DimensionError
        If ``theta`` does not have the model's dimension.
    """
    theta = model.check_dim(theta)
    if not np.all(np.isfinite(theta)):
        return ValidationReport(("non-finite parameter",))
    return ValidationReport(tuple(model.violations(theta)))


def _require_valid(model: ModelSpec, theta) -> np.ndarray:
    theta = model.check_dim(theta)
    report = validate_params(model, theta)
    if not report.ok:
        raise ValueError(f"invalid parameter {theta.tolist()}: {', '.join(report.violations)}")
    return theta


def resolve_lambda1(x: np.ndarray, lambda1: float | str | None, model: ModelSpec = LINEAR) -> float:
    """Turn a lambda1 option (``"mean"``, ``None`` or a number) into a clamped float."""
    if lambda1 is None or (isinstance(lambda1, str) and lambda1 == "mean"):
        value = float(np.mean(x))
    else:
        value = float(lambda1)
    return max(value, model.delta_l)


def _check_finite(lam: np.ndarray, *arrays: np.ndarray) -> None:
    if not np.all(np.isfinite(lam)) or not all(np.all(np.isfinite(a)) for a in arrays):
        raise NumericalError("non-finite intensity encountered in the recursion")


def intensity_filter(model: ModelSpec, theta, x, lambda1: float) -> IntensityPath:
    """Run ``lam[t] = f_theta(lam[t-1], x[t-1])`` from ``lam[0] = lambda1``.

    ``lambda1`` below ``model.delta_l`` is clamped up to it.
    """
    theta = model.check_dim(theta)
    x = as_counts(x)
    lam1 = max(float(lambda1), model.delta_l)
    lam = model.filter(theta, x, lam1)
    _check_finite(lam)
    return IntensityPath(lam=lam, grad=None, lambda1=lam1)


def intensity_and_gradient_filter(model: ModelSpec, theta, x, lambda1: float) -> IntensityPath:
    """Intensities plus their gradients via the chain rule.

    ``grad[0] = 0`` (the start value does not depend on theta) and
    ``grad[t] = df/dtheta + df/dlambda * grad[t-1]``.
    """
    theta = model.check_dim(theta)
    x = as_counts(x)
    lam1 = max(float(lambda1), model.delta_l)
    lam, grad = model.filter_grad(theta, x, lam1)
    _check_finite(lam, grad)
    return IntensityPath(lam=lam, grad=grad, lambda1=lam1)


def stationary_mean(theta, model: ModelSpec = LINEAR) -> float:
    """Stationary mean ``w / (1 - a - b)`` of the linear model."""
    if not isinstance(model, LinearModel):
        raise UnsupportedModel("stationary_mean is only available for the linear model")
    w, a, b = _require_valid(model, theta)
    return float(w / (1.0 - a - b))


def _simulate_steps(
    model: ModelSpec,
    theta0: np.ndarray,
    steps: int,
    rng: np.random.Generator,
    *,
    lambda1: float = 0.0,
    theta1: np.ndarray | None = None,
    switch: int | None = None,
    boost: np.ndarray | None = None,
    propagate: bool = True,
) -> tuple[np.ndarray, np.ndarray]:
    # boost: additive intensity shocks (innovation outliers); the Poisson draws
    # are the only use of ``rng`` so clean and contaminated paths share them.
    x = np.empty(steps, dtype=np.int64)
    lam = np.empty(steps)
    state = max(lambda1, model.delta_l)
    for t in range(steps):
        theta = theta1 if theta1 is not None and t >= switch else theta0
        clean = state if t == 0 else model.link(theta, state, x[t - 1])
        observed = clean + boost[t] if boost is not None else clean
        x[t] = rng.poisson(observed)
        lam[t] = observed
        state = observed if propagate else clean
    if not np.all(np.isfinite(lam)):
        raise NumericalError("non-finite intensity in simulation")
    return x, lam


def simulate(
    model: ModelSpec,
    theta,
    n: int,
    burn_in: int = 1000,
    seed: int = 0,
    *,
    lambda1: float = 0.0,
    theta1=None,
    change_at: int | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Simulate ``n`` counts after discarding ``burn_in`` steps.

    The start intensity (default 0) is clamped to ``model.delta_l``. Counts are
    drawn with ``numpy.random.default_rng(seed)`` (PCG64), one Poisson draw per
    step, so equal seeds give identical output.

    If ``theta1`` is given, observations with 0-based index ``>= change_at``
    (default ``n // 2``) are generated under ``theta1``; the intensity
    recursion carries over the change without restarting.

    Returns
    -------
    x : ndarray of int64, shape (n,)
    lam : ndarray of float, shape (n,)
        Latent intensities used for each draw.
    """
    theta = _require_valid(model, theta)
    if n < 1 or burn_in < 0:
        raise ValueError("n must be positive and burn_in nonnegative")
    th1 = None
    switch = None
    if theta1 is not None:
        th1 = _require_valid(model, theta1)
        switch = burn_in + (n // 2 if change_at is None else int(change_at))
    rng = np.random.default_rng(seed)
    x, lam = _simulate_steps(
        model, theta, burn_in + n, rng, lambda1=lambda1, theta1=th1, switch=switch
    )
    return x[burn_in:], lam[burn_in:]
