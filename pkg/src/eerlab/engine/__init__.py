"""Active-learning loop, data splits, metrics and result persistence."""

from eerlab.engine.config import ExperimentConfig, load_config
from eerlab.engine.loop import ExperimentResult, run_experiment, run_iteration
from eerlab.engine.metrics import auc_simpson, compare_methods

__all__ = [
    "ExperimentConfig",
    "ExperimentResult",
    "auc_simpson",
    "compare_methods",
    "load_config",
    "run_experiment",
    "run_iteration",
]
