"""Small Monte Carlo study: empirical size and power, clean and contaminated.

Uses 200 replications per cell so it finishes in a few minutes on one core;
the acceptance suite runs the same cells with 1000. Set ``DPCPT_THREADS`` to
use more processes.

Run with ``python3 demos/size_and_power.py``.
"""

from dpcpt import ContaminationSpec, ExperimentConfig, compute_d_ratio, emit_table, run_experiment

REPS = 200
ALPHAS = (0.0, 0.2, 0.5, 1.0)
THETA = (2.0, 0.1, 0.2)


def main():
    clean = run_experiment(ExperimentConfig(THETA, 300, REPS, alphas=ALPHAS))
    ao = run_experiment(
        ExperimentConfig(THETA, 300, REPS, alphas=ALPHAS, contamination=ContaminationSpec("AO", 0.01, 10))
    )
    power = run_experiment(ExperimentConfig(THETA, 300, REPS, alphas=ALPHAS, theta1=(2.0, 0.1, 0.4)))

    print(emit_table([clean, ao, power]))
    print("rejection-rate inflation under outliers (contaminated / clean size, 5% level):")
    for alpha in ALPHAS:
        try:
            print(f"  alpha={alpha:<4} d={compute_d_ratio(ao, clean, alpha):.2f}")
        except ZeroDivisionError:
            print(f"  alpha={alpha:<4} d=undefined (no clean rejections)")


if __name__ == "__main__":
    main()
