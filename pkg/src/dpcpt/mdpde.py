"""Minimum density power divergence estimation.

The estimator minimises the DP objective over a parameter box intersected
with the stationarity region. Each fit runs SLSQP (analytic gradient, box
bounds, linear stationarity constraint) from a moment-based start and a few
jittered copies, keeps the best local minimum, and finishes with a short
projected Newton refinement on the interior coordinates.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize

from dpcpt.divergence import objective_and_gradient, score_sequence
from dpcpt.exceptions import DataError, NumericalError, OptimizationError
from dpcpt.ingarch import LINEAR, LinearModel, ModelSpec, as_counts, resolve_lambda1

JITTER_SEED = 0x6D647064
BOUNDARY_EPS = 1e-6
HESSIAN_STEP = 1e-5


@dataclass
class FitOptions:
    """Optimizer configuration.

    ``parameter_box`` is a ``(d, 2)`` array of closed intervals; ``None`` uses
    the model's data-dependent default. ``lambda1`` is ``"mean"`` (sample
    mean of the series) or a number.
    """

    max_iterations: int = 500
    gradient_tolerance: float = 1e-7
    parameter_box: np.ndarray | None = None
    restarts: int = 2
    lambda1: float | str = "mean"


@dataclass
class FitResult:
    theta_hat: np.ndarray
    alpha: float
    objective_value: float
    converged: bool
    iterations: int
    on_boundary: np.ndarray
    lambda1: float
    gradient: np.ndarray
    k_hat: np.ndarray | None = None
    j_hat: np.ndarray | None = None
    sandwich_covariance: np.ndarray | None = None
    n: int = 0
    starts: list[np.ndarray] = field(default_factory=list, repr=False)

    def standard_errors(self) -> np.ndarray:
        if self.sandwich_covariance is None:
            raise ValueError("fit was run without covariance estimation")
        return np.sqrt(np.diag(self.sandwich_covariance))

    def to_dict(self) -> dict:
        def _arr(a):
            return None if a is None else np.asarray(a).tolist()

        return {
            "theta_hat": _arr(self.theta_hat),
            "alpha": self.alpha,
            "objective": self.objective_value,
            "converged": bool(self.converged),
            "iterations": int(self.iterations),
            "on_boundary": [bool(v) for v in self.on_boundary],
            "lambda1": self.lambda1,
            "n": self.n,
            "k_hat": _arr(self.k_hat),
            "j_hat": _arr(self.j_hat),
            "covariance": _arr(self.sandwich_covariance),
        }


def _acf(x: np.ndarray, lag: int) -> float:
    xc = x - x.mean()
    return float(np.dot(xc[:-lag], xc[lag:]) / np.dot(xc, xc))


def _lag1_autocorrelation(b: float, persistence: float) -> float:
    # INGARCH(1,1) lag-1 autocorrelation with b on X_{t-1} and a = persistence - b on lambda_{t-1}.
    p = persistence
    return b * (1.0 - (p - b) * p) / (1.0 - p * p + b * b)


def project(theta, box: np.ndarray, model: ModelSpec = LINEAR) -> np.ndarray:
    """Clip into the box; for the linear model also shrink (a, b) onto ``a + b <= 1 - delta_s``."""
    theta = np.clip(np.asarray(theta, dtype=float), box[:, 0], box[:, 1])
    if isinstance(model, LinearModel):
        limit = 1.0 - model.delta_s
        total = theta[1] + theta[2]
        if total > limit:
            theta[1:] *= limit / total
    return theta


def mom_initialize(x, model: ModelSpec = LINEAR, box: np.ndarray | None = None) -> np.ndarray:
    """Method-of-moments start for the linear model.

    The persistence ``a + b`` is the ratio of lag-2 to lag-1 sample
    autocorrelations (the ACF decays geometrically at that rate); ``b`` is
    then found by bisection so the model's lag-1 autocorrelation matches the
    sample one, and ``w = mean * (1 - a - b)``.
    """
    x = as_counts(x)
    if x.size < 10:
        raise DataError("need at least 10 observations for moment initialization")
    mean = float(x.mean())
    if mean <= 0 or float(x.var()) == 0.0:
        raise DataError("series is constant; moments are degenerate")
    if box is None:
        box = model.default_box(x)
    fallback = project([0.7 * mean, 0.1, 0.2], box, model)

    r1, r2 = _acf(x, 1), _acf(x, 2)
    if not (math.isfinite(r1) and math.isfinite(r2)) or r1 <= 0:
        return fallback
    persistence = min(max(r2 / r1, 0.05), 1.0 - 2.0 * model.delta_s)
    if r1 >= _lag1_autocorrelation(persistence, persistence):
        b = persistence
    else:
        b = optimize.bisect(
            lambda v: _lag1_autocorrelation(v, persistence) - r1, 0.0, persistence, xtol=1e-10
        )
    theta = np.array([mean * (1.0 - persistence), persistence - b, b])
    if not np.all(np.isfinite(theta)):
        return fallback
    return project(theta, box, model)


def _starts(model: ModelSpec, x: np.ndarray, box: np.ndarray, restarts: int) -> list[np.ndarray]:
    if isinstance(model, LinearModel):
        first = mom_initialize(x, model, box)
    elif model.initializer is not None:
        first = project(model.initializer(x), box, model)
    else:
        first = box.mean(axis=1)
    rng = np.random.default_rng(JITTER_SEED)
    width = box[:, 1] - box[:, 0]
    starts = [first]
    for _ in range(restarts):
        jitter = rng.uniform(-0.1, 0.1, size=first.shape) * width
        starts.append(project(first + jitter, box, model))
    return starts


class _Problem:
    """Objective restricted to the free (non-fixed) coordinates of the box."""

    def __init__(self, model, x, alpha, lam1, box):
        self.model = model
        self.x = x
        self.alpha = alpha
        self.lam1 = lam1
        self.box = box
        self.free = box[:, 0] < box[:, 1]
        self.base = box[:, 0].copy()

    def embed(self, z):
        theta = self.base.copy()
        theta[self.free] = z
        return theta

    def value_grad(self, theta):
        return objective_and_gradient(self.model, theta, self.x, self.alpha, self.lam1)

    def fun(self, z):
        value, grad = self.value_grad(self.embed(z))
        return value, grad[self.free]

    def constraints(self):
        model = self.model
        if isinstance(model, LinearModel):
            jac = -np.array([0.0, 1.0, 1.0])[self.free]
            return [
                {
                    "type": "ineq",
                    "fun": lambda z: model.stationarity_margin(self.embed(z)),
                    "jac": lambda z: jac,
                }
            ]
        return [{"type": "ineq", "fun": lambda z: model.stationarity_margin(self.embed(z))}]

    def feasible(self, theta) -> bool:
        return bool(
            np.all(theta >= self.box[:, 0])
            and np.all(theta <= self.box[:, 1])
            and self.model.stationarity_margin(theta) >= 0
        )


def _local_minimize(problem: _Problem, start: np.ndarray, options: FitOptions):
    z0 = start[problem.free]
    try:
        with warnings.catch_warnings():
            # SLSQP line searches may step past a bound before clipping; harmless here.
            warnings.filterwarnings("ignore", "Values in x were outside bounds", RuntimeWarning)
            res = optimize.minimize(
                problem.fun,
                z0,
                jac=True,
                method="SLSQP",
                bounds=problem.box[problem.free],
                constraints=problem.constraints(),
                options={"maxiter": options.max_iterations, "ftol": 1e-15},
            )
        theta = project(problem.embed(res.x), problem.box, problem.model)
        value, _ = problem.value_grad(theta)
        nit = int(res.nit)
    except NumericalError:
        theta, value, nit = _derivative_free(problem, start, options)
    if not math.isfinite(value):
        theta, value, nit = _derivative_free(problem, start, options)
    return theta, value, nit


def _derivative_free(problem: _Problem, start: np.ndarray, options: FitOptions):
    def penalised(z):
        theta = problem.embed(z)
        if problem.model.stationarity_margin(theta) < 0:
            return np.inf
        try:
            return problem.value_grad(theta)[0]
        except NumericalError:
            return np.inf

    if not math.isfinite(penalised(start[problem.free])):
        return start, math.inf, 0
    res = optimize.minimize(
        penalised,
        start[problem.free],
        method="Powell",
        bounds=problem.box[problem.free],
        options={"maxiter": options.max_iterations, "xtol": 1e-10, "ftol": 1e-14},
    )
    return problem.embed(res.x), float(res.fun), int(res.nit)


def _boundary_flags(problem: _Problem, theta: np.ndarray) -> np.ndarray:
    box = problem.box
    flags = problem.free & (
        (theta - box[:, 0] < BOUNDARY_EPS) | (box[:, 1] - theta < BOUNDARY_EPS)
    )
    if isinstance(problem.model, LinearModel) and problem.model.stationarity_margin(theta) < BOUNDARY_EPS:
        flags[1:] = True
    return flags


def _refine(problem: _Problem, theta: np.ndarray, value: float, target: float, max_steps: int = 8):
    """Projected Newton steps on interior coordinates until the gradient is below ``target``."""
    steps = 0
    _, grad = problem.value_grad(theta)
    for _ in range(max_steps):
        active = problem.free & ~_boundary_flags(problem, theta)
        if not np.any(active) or np.max(np.abs(grad[active])) <= target:
            break
        idx = np.flatnonzero(active)
        hess = np.empty((idx.size, idx.size))
        for j, i in enumerate(idx):
            h = HESSIAN_STEP * max(1.0, abs(theta[i]))
            tp, tm = theta.copy(), theta.copy()
            tp[i] += h
            tm[i] -= h
            hess[:, j] = (problem.value_grad(tp)[1][idx] - problem.value_grad(tm)[1][idx]) / (2 * h)
        hess = 0.5 * (hess + hess.T)
        try:
            step = np.linalg.solve(hess, -grad[idx])
        except np.linalg.LinAlgError:
            break
        if not np.all(np.isfinite(step)) or step @ grad[idx] >= 0:
            break
        scale = 1.0
        accepted = False
        while scale > 1e-6:
            cand = theta.copy()
            cand[idx] += scale * step
            if problem.feasible(cand):
                cand_value, cand_grad = problem.value_grad(cand)
                if cand_value <= value + 1e-12 * abs(value):
                    accepted = True
                    break
            scale *= 0.5
        if not accepted:
            break
        theta, value, grad = cand, cand_value, cand_grad
        steps += 1
    return theta, value, grad, steps


def fit(
    model: ModelSpec,
    x,
    alpha: float,
    options: FitOptions | None = None,
    *,
    covariance: bool = True,
) -> FitResult:
    """Minimum DP divergence estimate of theta for the series ``x``.

    Parameters
    ----------
    covariance : bool
        Also estimate ``K_hat``, ``J_hat`` and the sandwich covariance.

    Raises
    ------
    DataError
        Fewer than ``d + 1`` observations.
    OptimizationError
        No start produced a finite objective value.
    """
    options = options or FitOptions()
    x = as_counts(x)
    n = x.size
    if alpha < 0:
        raise ValueError("alpha must be nonnegative")
    if n < model.dim + 1:
        raise DataError(f"need at least {model.dim + 1} observations, got {n}")
    lam1 = resolve_lambda1(x, options.lambda1, model)
    box = model.default_box(x) if options.parameter_box is None else np.asarray(
        options.parameter_box, dtype=float
    )
    problem = _Problem(model, x, float(alpha), lam1, box)

    starts = _starts(model, x, box, options.restarts)
    candidates = []
    for start in starts:
        theta, value, nit = _local_minimize(problem, start, options)
        if math.isfinite(value):
            candidates.append((value, tuple(theta), nit))
    if not candidates:
        raise OptimizationError("no optimizer start produced a finite objective")
    value, theta, nit = min(candidates, key=lambda c: (c[0], c[1]))
    theta = np.array(theta)

    target = options.gradient_tolerance * n
    theta, value, grad, polish = _refine(problem, theta, value, 1e-3 * target)
    flags = _boundary_flags(problem, theta)
    check = problem.free & ~flags
    converged = bool(not np.any(check) or np.max(np.abs(grad[check])) <= target)

    result = FitResult(
        theta_hat=theta,
        alpha=float(alpha),
        objective_value=float(value),
        converged=converged,
        iterations=nit + polish,
        on_boundary=flags,
        lambda1=lam1,
        gradient=grad,
        n=n,
        starts=starts,
    )
    if covariance:
        result.k_hat = k_hat(model, theta, x, alpha, lam1)
        result.j_hat = j_hat(model, theta, x, alpha, lam1)
        result.sandwich_covariance = sandwich(result.j_hat, result.k_hat, n)
    return result


def k_hat_from_scores(scores, alpha: float) -> np.ndarray:
    """``(1+alpha)**-2 * mean_t s_t s_t^T`` for an ``(n, d)`` array of score terms."""
    scores = np.asarray(scores, dtype=float)
    if scores.ndim == 1:
        scores = scores[:, None]
    n = scores.shape[0]
    return (scores.T @ scores) / (n * (1.0 + alpha) ** 2)


def k_hat(model: ModelSpec, theta, x, alpha: float, lambda1: float) -> np.ndarray:
    """Outer-product estimate of the score covariance at ``theta``."""
    return k_hat_from_scores(score_sequence(model, theta, x, alpha, lambda1), alpha)


def j_hat(model: ModelSpec, theta, x, alpha: float, lambda1: float) -> np.ndarray:
    """``-(1+alpha)**-1 * mean_t d^2 loss_t / dtheta^2``.

    Second derivatives come from central differences of the analytic score
    (step ``1e-5 * max(1, |theta_i|)``), then the matrix is symmetrised. For
    the DP loss (a quantity being minimised) this matrix is negative
    semidefinite; the sandwich product is unaffected by the sign.
    """
    theta = np.asarray(theta, dtype=float)
    x = as_counts(x)
    n, d = x.size, theta.size
    hess = np.empty((d, d))
    for i in range(d):
        h = HESSIAN_STEP * max(1.0, abs(theta[i]))
        tp, tm = theta.copy(), theta.copy()
        tp[i] += h
        tm[i] -= h
        sp = score_sequence(model, tp, x, alpha, lambda1).sum(axis=0)
        sm = score_sequence(model, tm, x, alpha, lambda1).sum(axis=0)
        hess[:, i] = (sp - sm) / (2 * h)
    if not np.all(np.isfinite(hess)):
        raise NumericalError("non-finite Hessian entry")
    hess = 0.5 * (hess + hess.T)
    return -hess / ((1.0 + alpha) * n)


def sandwich(j: np.ndarray, k: np.ndarray, n: int) -> np.ndarray:
    """``J^-1 K J^-1 / n``, symmetrised with tiny negative eigenvalues clipped to zero."""
    jinv = np.linalg.inv(j)
    cov = jinv @ k @ jinv / n
    cov = 0.5 * (cov + cov.T)
    vals, vecs = np.linalg.eigh(cov)
    if vals.min() < -1e-10:
        raise NumericalError(f"sandwich covariance has eigenvalue {vals.min():.3e}")
    vals = np.clip(vals, 0.0, None)
    return (vecs * vals) @ vecs.T
