"""Command-line interface: ``dpcpt <command> ...``.

Exit status is 0 on success, 2 when ``test`` rejects the no-change
hypothesis, and 1 on any error.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from dpcpt.change_test import dp_score_statistic
from dpcpt.contamination import AO, IO, ContaminationSpec, contaminate_ao, simulate_io_path
from dpcpt.critical_values import DEFAULT_GRID, DEFAULT_REPS, DEFAULT_SEED, simulate_sup_bridge_quantiles
from dpcpt.exceptions import DpcptError
from dpcpt.harness import ExperimentConfig, default_workers, emit_table, run_experiment
from dpcpt.ingarch import LINEAR, simulate
from dpcpt.mdpde import FitOptions, fit
from dpcpt.series_io import read_columns, read_series, write_columns

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_REJECT = 2


def _levels(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(v) for v in text.split(",") if v.strip())
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad level list {text!r}") from exc


def _lambda1(text: str) -> float | str:
    if text == "mean":
        return text
    try:
        return float(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError("--lambda1 must be 'mean' or a number") from exc


def _write_json(path: str | None, payload: dict) -> None:
    text = json.dumps(payload, indent=2)
    if path is None:
        print(text)
    else:
        with open(path, "w") as fh:
            fh.write(text + "\n")


def cmd_simulate(args) -> int:
    theta = (args.w, args.a, args.b)
    if args.io_p is not None or args.io_gamma is not None:
        if args.io_p is None or args.io_gamma is None:
            raise ValueError("--io-p and --io-gamma must be given together")
        spec = ContaminationSpec(IO, args.io_p, args.io_gamma)
        x, p_t, lam = simulate_io_path(LINEAR, theta, args.n, args.burn_in, spec, args.seed)
        write_columns(args.out, {"x": x, "lambda": lam, "p_t": p_t})
    else:
        x, lam = simulate(LINEAR, theta, args.n, args.burn_in, args.seed)
        write_columns(args.out, {"x": x, "lambda": lam})
    return EXIT_OK


def cmd_contaminate(args) -> int:
    x = read_series(args.input, column="x" if "x" in read_columns(args.input) else None)
    x_o, p_t = contaminate_ao(x, ContaminationSpec(AO, args.p, args.gamma), args.seed)
    write_columns(args.out, {"x": x, "x_o": x_o, "p_t": p_t})
    return EXIT_OK


def cmd_fit(args) -> int:
    x = read_series(args.input)
    result = fit(LINEAR, x, args.alpha, FitOptions(lambda1=args.lambda1))
    payload = result.to_dict()
    payload["standard_errors"] = result.standard_errors().tolist()
    _write_json(args.out, payload)
    return EXIT_OK


def cmd_test(args) -> int:
    x = read_series(args.input)
    result = dp_score_statistic(LINEAR, x, args.alpha, levels=(args.level,))
    threshold = result.critical_values[args.level]
    reject = result.reject[args.level]
    print(f"statistic  {result.statistic:.6f}")
    print(f"threshold  {threshold:.6f}  (level {args.level:g})")
    print(f"decision   {'reject' if reject else 'accept'}")
    print(f"argmax_k   {result.argmax_k}")
    if args.out:
        payload = result.to_dict()
        payload.update(level=args.level, threshold=threshold, decision="reject" if reject else "accept")
        _write_json(args.out, payload)
    return EXIT_REJECT if reject else EXIT_OK


def cmd_mc_critical(args) -> int:
    quantiles = simulate_sup_bridge_quantiles(
        args.d, args.grid, args.reps, args.levels, args.seed, workers=default_workers()
    )
    print("d,level,threshold")
    for level, value in quantiles.items():
        print(f"{args.d},{level:g},{value:.4f}")
    return EXIT_OK


def cmd_experiment(args) -> int:
    with open(args.config) as fh:
        data = json.load(fh)
    configs = data if isinstance(data, list) else [data]
    results = [run_experiment(ExperimentConfig.from_dict(c)) for c in configs]
    text = emit_table(results, "json" if args.out.endswith(".json") else "csv")
    with open(args.out, "w") as fh:
        fh.write(text)
    return EXIT_OK


class _Parser(argparse.ArgumentParser):
    """Usage errors exit with 1 so that 2 unambiguously means "rejected"."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_ERROR, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="dpcpt", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("simulate", help="simulate a Poisson INGARCH(1,1) series")
    p.add_argument("--w", type=float, required=True)
    p.add_argument("--a", type=float, required=True)
    p.add_argument("--b", type=float, required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--burn-in", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--io-p", type=float, help="innovation-outlier probability")
    p.add_argument("--io-gamma", type=float, help="innovation-outlier Poisson mean")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("contaminate", help="add additive outliers to a series")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--p", type=float, required=True)
    p.add_argument("--gamma", type=float, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_contaminate)

    p = sub.add_parser("fit", help="minimum DP divergence estimate")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--lambda1", type=_lambda1, default="mean")
    p.add_argument("--out")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("test", help="test for a parameter change")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--level", type=float, default=0.05)
    p.add_argument("--out")
    p.set_defaults(func=cmd_test)

    p = sub.add_parser("mc-critical", help="simulate Brownian-bridge supremum quantiles")
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--grid", type=int, default=DEFAULT_GRID)
    p.add_argument("--reps", type=int, default=DEFAULT_REPS)
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--levels", type=_levels, default=(0.05, 0.10))
    p.set_defaults(func=cmd_mc_critical)

    p = sub.add_parser("experiment", help="run a size/power experiment from a JSON config")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_experiment)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (DpcptError, ValueError, OSError, KeyError, np.linalg.LinAlgError) as exc:
        print(f"dpcpt {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
