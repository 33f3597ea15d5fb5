"""Density power divergence loss for Poisson observations.

For an intensity ``lam``, count ``x`` and order ``alpha > 0`` the per-observation
loss is::

    S(lam, alpha) - (1 + 1/alpha) * pmf(x; lam)**alpha,
    S(lam, alpha) = sum_y pmf(y; lam)**(1 + alpha)

and for ``alpha = 0`` it is the negative Poisson log-likelihood
``lam - x*log(lam) + log(x!)``. The infinite sum is truncated at
``max(ceil(lam + 12*sqrt(lam) + 30), first y after which five consecutive
terms fall below POWER_SUM_TOL times the running sum)``.

The objective over a series is the sum of the losses along the filtered
intensity path; its gradient is ``dloss/dlam * dlam/dtheta`` summed over t.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

from dpcpt.ingarch import ModelSpec, as_counts, intensity_and_gradient_filter, intensity_filter

POWER_SUM_TOL = 1e-12

_LOG_FACTORIAL_SIZE = 1024
_LOG_FACTORIAL = np.array([math.lgamma(k + 1.0) for k in range(_LOG_FACTORIAL_SIZE)])
_LOG_FACTORIAL.setflags(write=False)


@njit(cache=True)
def _log_factorial(x):
    if x < _LOG_FACTORIAL_SIZE:
        return _LOG_FACTORIAL[x]
    return math.lgamma(x + 1.0)


@njit(cache=True)
def _power_sums(lam, alpha, tol):
    # Returns (sum_y p^(1+alpha), sum_y p^(1+alpha) * (y/lam - 1)).
    if alpha == 0.0:
        return 1.0, 0.0
    cap = math.ceil(lam + 12.0 * math.sqrt(lam) + 30.0)
    log_lam = math.log(lam)
    power = 1.0 + alpha
    total = 0.0
    dtotal = 0.0
    small = 0
    y = 0
    while True:
        logp = -lam + y * log_lam - _log_factorial(y)
        term = math.exp(power * logp)
        total += term
        dtotal += term * (y / lam - 1.0)
        if term < tol * total:
            small += 1
        else:
            small = 0
        if y >= cap and small >= 5:
            break
        y += 1
    return total, dtotal


@njit(cache=True)
def _loss_and_dloss(lam, x, alpha, tol):
    n = lam.shape[0]
    loss = np.empty(n)
    dloss = np.empty(n)
    if alpha == 0.0:
        for t in range(n):
            lt = lam[t]
            loss[t] = lt - x[t] * math.log(lt) + _log_factorial(x[t])
            dloss[t] = 1.0 - x[t] / lt
        return loss, dloss
    c = 1.0 + 1.0 / alpha
    for t in range(n):
        lt = lam[t]
        s, ds = _power_sums(lt, alpha, tol)
        logp = -lt + x[t] * math.log(lt) - _log_factorial(x[t])
        pa = math.exp(alpha * logp)
        loss[t] = s - c * pa
        dloss[t] = (1.0 + alpha) * (ds - pa * (x[t] / lt - 1.0))
    return loss, dloss


def poisson_power_sum(lam: float, alpha: float, tol: float = POWER_SUM_TOL) -> float:
    """Truncated ``sum_y pmf(y; lam)**(1 + alpha)``; exactly 1.0 when ``alpha == 0``."""
    if alpha < 0:
        raise ValueError("alpha must be nonnegative")
    return _power_sums(float(lam), float(alpha), float(tol))[0]


def _as_arrays(lam, x):
    lam = np.atleast_1d(np.asarray(lam, dtype=float))
    x = np.atleast_1d(np.asarray(x, dtype=np.int64))
    return np.broadcast_arrays(lam, x)


def dp_loss_term(lam, x, alpha: float):
    """Per-observation DP loss; vectorised over ``lam`` and ``x``."""
    if alpha < 0:
        raise ValueError("alpha must be nonnegative")
    lam_a, x_a = _as_arrays(lam, x)
    loss, _ = _loss_and_dloss(
        np.ascontiguousarray(lam_a), np.ascontiguousarray(x_a), float(alpha), POWER_SUM_TOL
    )
    return loss[0] if np.ndim(lam) == 0 and np.ndim(x) == 0 else loss.reshape(lam_a.shape)


def dp_loss_dlambda(lam, x, alpha: float):
    """Derivative of :func:`dp_loss_term` with respect to the intensity."""
    if alpha < 0:
        raise ValueError("alpha must be nonnegative")
    lam_a, x_a = _as_arrays(lam, x)
    _, dloss = _loss_and_dloss(
        np.ascontiguousarray(lam_a), np.ascontiguousarray(x_a), float(alpha), POWER_SUM_TOL
    )
    return dloss[0] if np.ndim(lam) == 0 and np.ndim(x) == 0 else dloss.reshape(lam_a.shape)


def objective(model: ModelSpec, theta, x, alpha: float, lambda1: float) -> float:
    """Sum of DP losses along the filtered intensity path."""
    x = as_counts(x)
    path = intensity_filter(model, theta, x, lambda1)
    loss, _ = _loss_and_dloss(path.lam, x, float(alpha), POWER_SUM_TOL)
    return float(loss.sum())


def score_sequence(model: ModelSpec, theta, x, alpha: float, lambda1: float) -> np.ndarray:
    """Per-observation loss gradients, shape ``(n, d)``.

    Row ``t`` is ``dloss/dlam(lam_t, x_t) * dlam_t/dtheta``; the column sums give
    the gradient of :func:`objective`.
    """
    x = as_counts(x)
    path = intensity_and_gradient_filter(model, theta, x, lambda1)
    _, dloss = _loss_and_dloss(path.lam, x, float(alpha), POWER_SUM_TOL)
    return dloss[:, None] * path.grad


def objective_and_gradient(
    model: ModelSpec, theta, x: np.ndarray, alpha: float, lambda1: float
) -> tuple[float, np.ndarray]:
    """Objective value and its gradient in one filter pass (optimizer entry point)."""
    path = intensity_and_gradient_filter(model, theta, x, lambda1)
    loss, dloss = _loss_and_dloss(path.lam, x, float(alpha), POWER_SUM_TOL)
    return float(loss.sum()), dloss @ path.grad
