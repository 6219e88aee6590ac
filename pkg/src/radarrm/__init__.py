"""Cognitive-radar resource management workbench.

A multi-target radar simulator (EKF tracking, scan/detect, dwell-time
budget), a constrained DDPG agent that allocates dwell times under a
time-budget constraint, and two local surrogate explainers (conventional
LIME and a correlation-aware variant that reconstructs tracking costs
with a learned regressor).
"""

__version__ = "0.1.0"

from .config import ExperimentConfig, load_config
from .environment import RadarEnv, StepOutcome, build_environment
from .agent import DdpgNets, train
from .explain import Explanation, explain, train_costnet
from .evaluate import collect_dataset, crn_rollouts, mae, peak_performance

__all__ = [
    "ExperimentConfig",
    "load_config",
    "RadarEnv",
    "StepOutcome",
    "build_environment",
    "DdpgNets",
    "train",
    "Explanation",
    "explain",
    "train_costnet",
    "collect_dataset",
    "crn_rollouts",
    "mae",
    "peak_performance",
    "__version__",
]
