"""Three-tier (device, edge, cloud) federated learning simulator with PHE-FL personalization."""

__version__ = "0.1.0"

from .aggregation import (
    AlphaRecord,
    WeightedModel,
    cloud_aggregate_per_edge,
    compute_alpha,
    global_aggregate,
    personalize,
    weighted_average,
)
from .estimator import MLPClassifier
from .metrics import acc_n, compare_strategies, drop_m, rolling_mean
from .model import Dataset, ModelSpec, ParameterVector
from .orchestrator import ExperimentConfig, RoundRecord, Strategy, derive_seed, run_experiment

__all__ = [
    "AlphaRecord",
    "Dataset",
    "ExperimentConfig",
    "MLPClassifier",
    "ModelSpec",
    "ParameterVector",
    "RoundRecord",
    "Strategy",
    "WeightedModel",
    "acc_n",
    "cloud_aggregate_per_edge",
    "compare_strategies",
    "compute_alpha",
    "derive_seed",
    "drop_m",
    "global_aggregate",
    "personalize",
    "rolling_mean",
    "run_experiment",
    "weighted_average",
]
