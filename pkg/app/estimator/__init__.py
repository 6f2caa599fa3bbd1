from app.estimator.base import EstimatorConfig, GradientEstimate, MomentStats
from app.estimator.estimators import (
    KERNELS,
    barrier_estimate,
    entropy_estimate,
    estimate,
    estimate_with,
    gpomdp,
    per_trajectory,
    pgt,
    reinforce,
)
from app.estimator.survey import moment_survey


__all__ = [
    "KERNELS",
    "EstimatorConfig",
    "GradientEstimate",
    "MomentStats",
    "barrier_estimate",
    "entropy_estimate",
    "estimate",
    "estimate_with",
    "gpomdp",
    "moment_survey",
    "per_trajectory",
    "pgt",
    "reinforce",
]
