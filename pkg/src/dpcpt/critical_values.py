"""Critical values of ``sup_{0<=s<=1} ||B_d(s)||^2`` for d independent Brownian bridges.

The two d = 3 thresholds used throughout the simulation study ship as
constants. Every other (d, level) pair is simulated once and cached in a CSV
file (``$DPCPT_CACHE_DIR/critical_values.csv``, default ``~/.cache/dpcpt``).

Discretisation bias
-------------------
The maximum over a grid of ``m`` points underestimates the supremum of the
continuous process. By default each simulated maximum of the norm is shifted
up by ``beta / sqrt(m)`` with ``beta = -zeta(1/2) / sqrt(2*pi) ~= 0.5826``
(the Broadie-Glasserman-Kou continuity correction), which removes the
leading-order bias. Pass ``continuity_correction=False`` for raw grid maxima.
"""

from __future__ import annotations

import csv
import math
import os
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
from scipy.special import zeta

DEFAULT_GRID = 2000
DEFAULT_REPS = 50_000
DEFAULT_SEED = 20_190_417
CHUNK_REPS = 500

CONTINUITY_BETA = -float(zeta(0.5)) / math.sqrt(2.0 * math.pi)

PUBLISHED_CRITICAL_VALUES = {(3, 0.05): 3.027, (3, 0.10): 2.604}

CSV_COLUMNS = ("d", "level", "threshold", "provenance", "grid", "reps", "seed")


def _sup_bridge_chunk(d: int, grid: int, reps: int, seed: np.random.SeedSequence) -> np.ndarray:
    rng = np.random.default_rng(seed)
    s = np.arange(1, grid + 1) / grid
    w = np.cumsum(rng.standard_normal((reps, d, grid)), axis=2)
    w /= math.sqrt(grid)
    bridge = w - s * w[:, :, -1:]
    return np.max(np.sum(bridge * bridge, axis=1), axis=1)


def sup_bridge_samples(
    d: int,
    grid: int = DEFAULT_GRID,
    reps: int = DEFAULT_REPS,
    seed: int = DEFAULT_SEED,
    *,
    continuity_correction: bool = True,
    workers: int = 1,
) -> np.ndarray:
    """Simulated draws of ``max_k ||B_d(k/grid)||^2``.

    Replications are split into fixed-size chunks, each with its own child
    seed spawned from ``seed``, so the output does not depend on ``workers``.
    """
    if d < 1 or grid < 1 or reps < 1:
        raise ValueError("d, grid and reps must be positive")
    sizes = [CHUNK_REPS] * (reps // CHUNK_REPS)
    if reps % CHUNK_REPS:
        sizes.append(reps % CHUNK_REPS)
    seeds = np.random.SeedSequence(seed).spawn(len(sizes))
    jobs = list(zip(sizes, seeds))
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            parts = list(pool.map(lambda job: _sup_bridge_chunk(d, grid, *job), jobs))
    else:
        parts = [_sup_bridge_chunk(d, grid, *job) for job in jobs]
    out = np.concatenate(parts)
    if continuity_correction:
        out = (np.sqrt(out) + CONTINUITY_BETA / math.sqrt(grid)) ** 2
    return out


def simulate_sup_bridge_quantiles(
    d: int,
    grid: int = DEFAULT_GRID,
    reps: int = DEFAULT_REPS,
    levels=(0.05, 0.10),
    seed: int = DEFAULT_SEED,
    *,
    continuity_correction: bool = True,
    workers: int = 1,
) -> dict[float, float]:
    """Upper ``level`` quantiles of the simulated supremum, keyed by level."""
    if grid < 1000 or reps < 10_000:
        raise ValueError("need grid >= 1000 and reps >= 10000 for usable quantiles")
    draws = sup_bridge_samples(
        d, grid, reps, seed, continuity_correction=continuity_correction, workers=workers
    )
    return {float(lv): float(np.quantile(draws, 1.0 - lv)) for lv in levels}


@dataclass(frozen=True)
class CriticalValue:
    d: int
    level: float
    threshold: float
    provenance: str
    grid: int | None = None
    reps: int | None = None
    seed: int | None = None


def _key(d: int, level: float) -> tuple[int, float]:
    return int(d), round(float(level), 10)


def default_cache_path() -> Path:
    root = os.environ.get("DPCPT_CACHE_DIR")
    base = Path(root) if root else Path.home() / ".cache" / "dpcpt"
    return base / "critical_values.csv"


class CriticalValueTable:
    """Thresholds keyed by ``(d, level)`` with provenance.

    Lookups of missing pairs simulate all requested levels for that ``d``
    (under a lock, so concurrent readers never see a half-written entry) and
    append them to the cache file when one is configured.
    """

    def __init__(
        self,
        path: Path | str | None = None,
        grid: int = DEFAULT_GRID,
        reps: int = DEFAULT_REPS,
        seed: int = DEFAULT_SEED,
    ):
        self.path = Path(path) if path is not None else None
        self.grid, self.reps, self.seed = grid, reps, seed
        self._lock = threading.Lock()
        self._entries: dict[tuple[int, float], CriticalValue] = {
            _key(d, lv): CriticalValue(d, lv, value, "PUBLISHED")
            for (d, lv), value in PUBLISHED_CRITICAL_VALUES.items()
        }
        if self.path is not None and self.path.exists():
            self._load()

    def _load(self) -> None:
        with open(self.path, newline="") as fh:
            for row in csv.DictReader(fh):
                key = _key(int(row["d"]), float(row["level"]))
                if key in self._entries and self._entries[key].provenance == "PUBLISHED":
                    continue
                self._entries[key] = CriticalValue(
                    d=key[0],
                    level=key[1],
                    threshold=float(row["threshold"]),
                    provenance=row["provenance"],
                    grid=int(row["grid"]) if row["grid"] else None,
                    reps=int(row["reps"]) if row["reps"] else None,
                    seed=int(row["seed"]) if row["seed"] else None,
                )

    def save(self, path: Path | str | None = None) -> None:
        path = Path(path) if path is not None else self.path
        if path is None:
            raise ValueError("no cache path configured")
        path.parent.mkdir(parents=True, exist_ok=True)
        tmp = path.with_suffix(".tmp")
        with open(tmp, "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=CSV_COLUMNS)
            writer.writeheader()
            for entry in sorted(self._entries.values(), key=lambda e: (e.d, e.level)):
                writer.writerow({k: ("" if v is None else v) for k, v in asdict(entry).items()})
        os.replace(tmp, path)

    def entry(self, d: int, level: float, *, simulate: bool = True) -> CriticalValue:
        key = _key(d, level)
        found = self._entries.get(key)
        if found is not None:
            return found
        if not simulate:
            raise KeyError(f"no critical value for d={d}, level={level}")
        with self._lock:
            if key not in self._entries:
                quantiles = simulate_sup_bridge_quantiles(
                    key[0], self.grid, self.reps, (key[1],), self.seed
                )
                for lv, value in quantiles.items():
                    self._entries[_key(d, lv)] = CriticalValue(
                        key[0], lv, value, "SIMULATED", self.grid, self.reps, self.seed
                    )
                if self.path is not None:
                    self.save()
        return self._entries[key]

    def __getitem__(self, key: tuple[int, float]) -> float:
        return self.entry(*key).threshold

    def entries(self) -> list[CriticalValue]:
        return sorted(self._entries.values(), key=lambda e: (e.d, e.level))


_default_table: CriticalValueTable | None = None
_default_lock = threading.Lock()


def default_table() -> CriticalValueTable:
    global _default_table
    with _default_lock:
        if _default_table is None or _default_table.path != default_cache_path():
            _default_table = CriticalValueTable(default_cache_path())
        return _default_table


def critical_value(d: int, level: float, table: CriticalValueTable | None = None) -> float:
    """Threshold for ``d`` parameters at significance ``level``.

    ``(3, 0.05) -> 3.027`` and ``(3, 0.10) -> 2.604`` are built in; other pairs
    are simulated on first use and cached.
    """
    if not 0.0 < level < 1.0:
        raise ValueError("level must lie in (0, 1)")
    return (table or default_table())[d, level]
