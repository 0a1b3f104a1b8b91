"""Bilateral client selection for federated learning.

Reward economics, SDR regression-tree bootstrapping for newcomer devices,
capacitated stable matching and a multi-round simulator, backed by a C++ core.
"""

from ._core import (
    BudgetExhausted,
    ConfigError,
    ExperimentConfig,
    ExperimentReport,
    NoTrainingData,
    OracleRefused,
    RangeError,
    RegressionTree,
    ValidationError,
    accuracy_gap_std,
    brute_force_stable,
    coefficient_of_variation,
    data_rate,
    global_accuracy,
    is_stable,
    kfold_mse,
    operational_earnings,
    population_sd,
    run_experiment,
    run_matching,
    sample_mean,
    scale_latency,
    sdr,
    split_table,
    total_reward,
    traffic_earnings,
    update_calls,
)

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
