"""Estimation of successive Blumenthal-Getoor indices from high-frequency increments."""

from .counts import TailCountCurve, count_increments, count_true_jumps, exceedance_counts, tail_curve
from .estimators import (
    ContrastConfig,
    EstimateSet,
    PrelimConfig,
    Status,
    final_estimate,
    identifiable_indices,
    minimize_contrast,
    preliminary_estimate,
    sanitize,
    stop_rule,
)
from .fisher import FisherResult, ParametricModel, fisher_diagonal, optimal_rates, rate_comparison
from .harness import ExperimentConfig, ResultTable, run_monte_carlo
from .simulate import (
    ConstantVolatility,
    HestonJumpVolatility,
    IncrementSeries,
    ModelSpec,
    SamplingScheme,
    read_increments,
    stochvol_model,
    simulate_path,
    write_increments,
)
from .stable import StableLaw, calibrate_intensity, tail_constant, tail_prob

__version__ = "0.1.0"
