"""Monte Carlo size/power experiments.

Replication ``r`` simulates its series with seed ``base_seed + r`` (AO and IO
draws use the derived contamination stream of the same seed), runs the test
for every alpha on that one series, and records the statistic. Replications
may run in worker processes; results are gathered by replication index, so
the output is identical for any worker count.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import partial

import numpy as np

from dpcpt import __version__
from dpcpt.change_test import dp_score_statistic
from dpcpt.contamination import AO, IO, ContaminationSpec, contaminate_ao, simulate_io
from dpcpt.critical_values import critical_value
from dpcpt.exceptions import DegenerateRatioError, DpcptError, ExperimentAborted
from dpcpt.ingarch import LINEAR, simulate, validate_params
from dpcpt.mdpde import FitOptions

DEFAULT_ALPHAS = (0.0, 0.1, 0.2, 0.3, 0.5, 1.0)
DEFAULT_LEVELS = (0.05, 0.10)
MAX_FAILURE_FRACTION = 0.10

TABLE_COLUMNS = (
    "theta0",
    "theta1",
    "n",
    "contamination_kind",
    "p",
    "gamma",
    "alpha",
    "level",
    "rate",
    "mc_se",
    "d_ratio",
    "failures",
    "seed",
)


def default_workers() -> int:
    env = os.environ.get("DPCPT_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


@dataclass
class ExperimentConfig:
    """One cell of a size or power table.

    ``theta1`` set means a power run with the change after ``n // 2``
    observations. Contamination, when given, applies to the whole series.
    """

    theta0: tuple[float, ...]
    n: int
    replications: int = 1000
    alphas: tuple[float, ...] = DEFAULT_ALPHAS
    levels: tuple[float, ...] = DEFAULT_LEVELS
    theta1: tuple[float, ...] | None = None
    contamination: ContaminationSpec | None = None
    burn_in: int = 1000
    base_seed: int = 0
    workers: int | None = None
    io_propagate: bool = True

    def __post_init__(self):
        self.theta0 = tuple(float(v) for v in self.theta0)
        if self.theta1 is not None:
            self.theta1 = tuple(float(v) for v in self.theta1)
        self.alphas = tuple(float(a) for a in self.alphas)
        self.levels = tuple(float(lv) for lv in self.levels)
        if isinstance(self.contamination, dict):
            self.contamination = ContaminationSpec(**self.contamination)
        if self.replications < 1:
            raise ValueError("replications must be at least 1")
        for theta in (self.theta0, self.theta1):
            if theta is not None and not validate_params(LINEAR, theta).ok:
                raise ValueError(f"invalid parameter {theta}")

    def to_dict(self) -> dict:
        c = self.contamination
        return {
            "theta0": list(self.theta0),
            "theta1": None if self.theta1 is None else list(self.theta1),
            "n": self.n,
            "replications": self.replications,
            "alphas": list(self.alphas),
            "levels": list(self.levels),
            "contamination": None if c is None else {"kind": c.kind, "p": c.p, "gamma": c.gamma},
            "burn_in": self.burn_in,
            "base_seed": self.base_seed,
            "workers": self.workers,
            "io_propagate": self.io_propagate,
        }

    @classmethod
    def from_dict(cls, data: dict) -> ExperimentConfig:
        return cls(**data)


@dataclass
class RateEntry:
    alpha: float
    level: float
    rejections: int
    successes: int
    failures: int

    @property
    def rate(self) -> float:
        return self.rejections / self.successes if self.successes else float("nan")

    @property
    def mc_se(self) -> float:
        r = self.rate
        return math.sqrt(r * (1.0 - r) / self.successes) if self.successes else float("nan")


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    entries: dict[tuple[float, float], RateEntry]
    statistics: dict[float, np.ndarray]
    argmax: dict[float, np.ndarray]
    metadata: dict = field(default_factory=dict)

    def entry(self, alpha: float, level: float) -> RateEntry:
        return self.entries[(float(alpha), float(level))]

    def rate(self, alpha: float, level: float = 0.05) -> float:
        return self.entry(alpha, level).rate


def simulate_replication(config: ExperimentConfig, r: int) -> np.ndarray:
    """The series used by replication ``r``."""
    seed = config.base_seed + r
    spec = config.contamination
    if spec is not None and spec.kind == IO:
        x, _ = simulate_io(
            LINEAR,
            config.theta0,
            config.n,
            config.burn_in,
            spec,
            seed,
            propagate=config.io_propagate,
            theta1=config.theta1,
        )
        return x
    x, _ = simulate(LINEAR, config.theta0, config.n, config.burn_in, seed, theta1=config.theta1)
    if spec is not None and spec.kind == AO:
        x, _ = contaminate_ao(x, spec, seed)
    return x


def _replicate(config: ExperimentConfig, r: int) -> list[tuple[float, int] | None]:
    x = simulate_replication(config, r)
    out = []
    for alpha in config.alphas:
        try:
            res = dp_score_statistic(LINEAR, x, alpha, FitOptions(), levels=())
        except (DpcptError, np.linalg.LinAlgError):
            out.append(None)
            continue
        out.append((res.statistic, res.argmax_k))
    return out


def run_experiment(config: ExperimentConfig) -> ExperimentResult:
    """Run all replications and tally rejections per (alpha, level).

    Raises
    ------
    ExperimentAborted
        If more than 10% of replications fail for some alpha.
    """
    start = time.perf_counter()
    workers = config.workers
    if workers is None or os.environ.get("DPCPT_THREADS"):
        workers = default_workers()
    job = partial(_replicate, config)
    reps = range(config.replications)
    if workers > 1:
        chunk = max(1, config.replications // (4 * workers))
        with ProcessPoolExecutor(workers) as pool:
            outcomes = list(pool.map(job, reps, chunksize=chunk))
    else:
        outcomes = [job(r) for r in reps]

    d = len(config.theta0)
    thresholds = {lv: critical_value(d, lv) for lv in config.levels}
    entries: dict[tuple[float, float], RateEntry] = {}
    statistics: dict[float, np.ndarray] = {}
    argmax: dict[float, np.ndarray] = {}
    for i, alpha in enumerate(config.alphas):
        stats = np.array([np.nan if o[i] is None else o[i][0] for o in outcomes])
        ks = np.array([-1 if o[i] is None else o[i][1] for o in outcomes], dtype=np.int64)
        ok = ~np.isnan(stats)
        failures = int((~ok).sum())
        if failures > MAX_FAILURE_FRACTION * config.replications:
            raise ExperimentAborted(
                f"{failures} of {config.replications} replications failed for alpha={alpha}"
            )
        statistics[alpha] = stats
        argmax[alpha] = ks
        for lv in config.levels:
            entries[(alpha, lv)] = RateEntry(
                alpha=alpha,
                level=lv,
                rejections=int(np.sum(stats[ok] > thresholds[lv])),
                successes=int(ok.sum()),
                failures=failures,
            )
    metadata = {
        "config": config.to_dict(),
        "replication_seeds": f"base_seed + r for r in 0..{config.replications - 1}",
        "contamination_stream": "seed ^ CONTAMINATION_SALT",
        "critical_values": {str(lv): cv for lv, cv in thresholds.items()},
        "workers": workers,
        "wall_time_s": time.perf_counter() - start,
        "version": __version__,
    }
    return ExperimentResult(config, entries, statistics, argmax, metadata)


def rate_ratio(contaminated_rate: float, clean_rate: float) -> float:
    if clean_rate == 0:
        raise DegenerateRatioError("clean rejection rate is zero")
    return contaminated_rate / clean_rate


def compute_d_ratio(
    contaminated: ExperimentResult, clean: ExperimentResult, alpha: float, level: float = 0.05
) -> float:
    """Contaminated over clean rejection rate for one (alpha, level)."""
    return rate_ratio(contaminated.rate(alpha, level), clean.rate(alpha, level))


def _pair_key(cfg: ExperimentConfig):
    return (cfg.theta0, cfg.theta1, cfg.n, cfg.burn_in, cfg.replications, cfg.base_seed)


def _fmt_theta(theta) -> str:
    return "" if theta is None else "(" + ",".join(f"{v:g}" for v in theta) + ")"


def table_rows(results: list[ExperimentResult]) -> list[dict]:
    if not results:
        raise ValueError("no results to tabulate")
    clean = {_pair_key(r.config): r for r in results if r.config.contamination is None}
    rows = []
    for res in results:
        cfg = res.config
        spec = cfg.contamination
        partner = clean.get(_pair_key(cfg)) if spec is not None else None
        for alpha in cfg.alphas:
            for lv in cfg.levels:
                e = res.entry(alpha, lv)
                ratio = None
                if partner is not None and (alpha, lv) in partner.entries:
                    try:
                        ratio = compute_d_ratio(res, partner, alpha, lv)
                    except DegenerateRatioError:
                        ratio = None
                rows.append(
                    {
                        "theta0": _fmt_theta(cfg.theta0),
                        "theta1": _fmt_theta(cfg.theta1),
                        "n": cfg.n,
                        "contamination_kind": "" if spec is None else spec.kind,
                        "p": "" if spec is None else spec.p,
                        "gamma": "" if spec is None else spec.gamma,
                        "alpha": alpha,
                        "level": lv,
                        "rate": f"{e.rate:.4f}",
                        "mc_se": f"{e.mc_se:.4f}",
                        "d_ratio": "" if ratio is None else f"{ratio:.4f}",
                        "failures": e.failures,
                        "seed": cfg.base_seed,
                    }
                )
    return rows


def emit_table(results: list[ExperimentResult], fmt: str = "csv") -> str:
    """Serialise results as CSV (fixed column order) or JSON (list of rows)."""
    rows = table_rows(results)
    if fmt == "json":
        return json.dumps(rows, indent=2)
    if fmt != "csv":
        raise ValueError(f"unknown format {fmt!r}")
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=TABLE_COLUMNS, lineterminator="\n")
    writer.writeheader()
    writer.writerows(rows)
    return buf.getvalue()


def parse_table(text: str, fmt: str = "csv") -> list[dict]:
    """Inverse of :func:`emit_table`; numeric columns come back as numbers (or None)."""
    rows = json.loads(text) if fmt == "json" else list(csv.DictReader(io.StringIO(text)))
    floats = ("p", "gamma", "alpha", "level", "rate", "mc_se", "d_ratio")
    ints = ("n", "failures", "seed")
    out = []
    for row in rows:
        parsed = dict(row)
        for key in floats:
            parsed[key] = float(row[key]) if row[key] not in ("", None) else None
        for key in ints:
            parsed[key] = int(row[key])
        out.append(parsed)
    return out
