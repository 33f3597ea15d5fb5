"""Simulate sup-norm Brownian-bridge quantiles and compare with known values.

For one dimension the supremum of the squared bridge has the Kolmogorov
distribution, so its 5% quantile is ``kolmogi(0.05) ** 2``.

Run with ``python3 demos/critical_values.py``.
"""

from scipy.special import kolmogi

from dpcpt import critical_value, simulate_sup_bridge_quantiles


def main():
    for d in (1, 2, 3):
        q = simulate_sup_bridge_quantiles(d, reps=20_000)
        print(f"d={d}: 5% {q[0.05]:.3f}  10% {q[0.10]:.3f}")
    print(f"exact d=1 5% quantile: {kolmogi(0.05) ** 2:.4f}")
    print(f"built-in d=3 values:   {critical_value(3, 0.05):.3f}, {critical_value(3, 0.10):.3f}")


if __name__ == "__main__":
    main()
