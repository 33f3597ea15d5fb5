"""Additive (AO) and innovation (IO) outlier contamination.

AO: ``x_o[t] = x[t] + p[t] * xc[t]`` with ``p[t] ~ Bernoulli(p)`` and
``xc[t] ~ Poisson(gamma)``, all independent of the clean series.

IO: the intensity is shocked before the Poisson draw,
``lam_o[t] = lam[t] + p[t] * lc[t]`` with ``lc[t] ~ Poisson(gamma)``. By
default the shocked intensity also feeds the next step of the recursion;
``propagate=False`` keeps the clean intensity in the recursion instead.

Contamination variables come from a stream derived as ``seed ^ CONTAMINATION_SALT``
so the base series draws are unchanged when contamination is toggled.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from dpcpt.ingarch import ModelSpec, _require_valid, _simulate_steps, as_counts

CONTAMINATION_SALT = 0x5DEECE66D

AO = "AO"
IO = "IO"


@dataclass(frozen=True)
class ContaminationSpec:
    kind: str
    p: float
    gamma: float

    def __post_init__(self):
        kind = self.kind.upper()
        if kind not in (AO, IO):
            raise ValueError(f"unknown contamination kind {self.kind!r}")
        object.__setattr__(self, "kind", kind)
        if not 0.0 <= self.p <= 1.0:
            raise ValueError("p must lie in [0, 1]")
        if not self.gamma > 0:
            raise ValueError("gamma must be positive")


def contamination_rng(seed: int) -> np.random.Generator:
    return np.random.default_rng(int(seed) ^ CONTAMINATION_SALT)


def _draw(rng: np.random.Generator, size: int, p: float, gamma: float):
    indicators = (rng.random(size) < p).astype(np.int64)
    magnitudes = rng.poisson(gamma, size)
    return indicators, magnitudes


def apply_ao(x, indicators, magnitudes) -> np.ndarray:
    return as_counts(x) + np.asarray(indicators, dtype=np.int64) * np.asarray(magnitudes, dtype=np.int64)


def contaminate_ao(x, spec: ContaminationSpec, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Return the AO-contaminated series and the 0/1 outlier indicators."""
    if spec.kind != AO:
        raise ValueError("contaminate_ao needs an AO specification")
    x = as_counts(x)
    indicators, magnitudes = _draw(contamination_rng(seed), x.size, spec.p, spec.gamma)
    return apply_ao(x, indicators, magnitudes), indicators


def simulate_io_path(
    model: ModelSpec,
    theta,
    n: int,
    burn_in: int,
    spec: ContaminationSpec,
    seed: int,
    *,
    propagate: bool = True,
    theta1=None,
    change_at: int | None = None,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Like :func:`simulate_io` but also returns the intensities used for each draw."""
    if spec.kind != IO:
        raise ValueError("simulate_io needs an IO specification")
    theta = _require_valid(model, theta)
    th1 = _require_valid(model, theta1) if theta1 is not None else None
    steps = burn_in + n
    indicators, magnitudes = _draw(contamination_rng(seed), steps, spec.p, spec.gamma)
    boost = (indicators * magnitudes).astype(float)
    switch = burn_in + (n // 2 if change_at is None else int(change_at)) if th1 is not None else None
    x, lam = _simulate_steps(
        model,
        theta,
        steps,
        np.random.default_rng(seed),
        theta1=th1,
        switch=switch,
        boost=boost,
        propagate=propagate,
    )
    return x[burn_in:], indicators[burn_in:], lam[burn_in:]


def simulate_io(
    model: ModelSpec,
    theta,
    n: int,
    burn_in: int,
    spec: ContaminationSpec,
    seed: int,
    *,
    propagate: bool = True,
    theta1=None,
    change_at: int | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Simulate an IO-contaminated series; returns ``(x, indicators)``.

    With ``p = 0`` the output is bitwise identical to
    :func:`dpcpt.ingarch.simulate` for the same seed.
    """
    x, indicators, _ = simulate_io_path(
        model, theta, n, burn_in, spec, seed, propagate=propagate, theta1=theta1, change_at=change_at
    )
    return x, indicators
