"""Next-basket recommendation evaluation harness.

Preprocess basket datasets, run frequency and neighbor baselines, and score
any method's ranked predictions with conventional and repetition/exploration
metrics.
"""

from nbreval.core import (
    Basket,
    EvalCohort,
    EvalInstance,
    GroundTruth,
    RankedPrediction,
    UserHistory,
    partition_basket,
)
from nbreval.dataset import DatasetBundle, DatasetStats, Vocabulary, build_cohort, compute_stats
from nbreval.metrics import MetricsReport, PerUserMetrics, evaluate

__version__ = "0.1.0"

__all__ = [
    "Basket",
    "DatasetBundle",
    "DatasetStats",
    "EvalCohort",
    "EvalInstance",
    "GroundTruth",
    "MetricsReport",
    "PerUserMetrics",
    "RankedPrediction",
    "UserHistory",
    "Vocabulary",
    "build_cohort",
    "compute_stats",
    "evaluate",
    "partition_basket",
]
