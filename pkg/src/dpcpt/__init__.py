"""Robust change-point testing for Poisson autoregressive count series.

The test statistic is built from partial sums of density-power-divergence
score terms evaluated at the minimum DP divergence estimate; ``alpha = 0``
recovers the likelihood score test.
"""

__version__ = "0.1.0"

from dpcpt.change_test import (
    TestResult,
    centered_partial_sums,
    decide,
    dp_score_statistic,
    fisher_information,
    invert_k,
    observed_information,
    statistic_from_scores,
)
from dpcpt.contamination import ContaminationSpec, contaminate_ao, simulate_io
from dpcpt.critical_values import CriticalValueTable, critical_value, simulate_sup_bridge_quantiles
from dpcpt.divergence import (
    dp_loss_dlambda,
    dp_loss_term,
    objective,
    poisson_power_sum,
    score_sequence,
)
from dpcpt.exceptions import (
    DataError,
    DegenerateRatioError,
    DimensionError,
    ExperimentAborted,
    NumericalError,
    OptimizationError,
    SingularKError,
    UnsupportedModel,
)
from dpcpt.harness import ExperimentConfig, ExperimentResult, compute_d_ratio, emit_table, run_experiment
from dpcpt.ingarch import (
    LINEAR,
    CustomModel,
    LinearModel,
    intensity_and_gradient_filter,
    intensity_filter,
    simulate,
    stationary_mean,
    validate_params,
)
from dpcpt.mdpde import FitOptions, FitResult, fit, j_hat, k_hat, mom_initialize

__all__ = [
    "LINEAR",
    "ContaminationSpec",
    "CriticalValueTable",
    "CustomModel",
    "DataError",
    "DegenerateRatioError",
    "DimensionError",
    "ExperimentAborted",
    "ExperimentConfig",
    "ExperimentResult",
    "FitOptions",
    "FitResult",
    "LinearModel",
    "NumericalError",
    "OptimizationError",
    "SingularKError",
    "TestResult",
    "UnsupportedModel",
    "centered_partial_sums",
    "compute_d_ratio",
    "contaminate_ao",
    "critical_value",
    "decide",
    "dp_loss_dlambda",
    "dp_loss_term",
    "dp_score_statistic",
    "emit_table",
    "fisher_information",
    "fit",
    "intensity_and_gradient_filter",
    "intensity_filter",
    "invert_k",
    "j_hat",
    "k_hat",
    "mom_initialize",
    "objective",
    "observed_information",
    "poisson_power_sum",
    "run_experiment",
    "score_sequence",
    "simulate",
    "simulate_io",
    "simulate_sup_bridge_quantiles",
    "stationary_mean",
    "statistic_from_scores",
    "validate_params",
]
