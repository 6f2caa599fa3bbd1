from app.mdp.benchmarks import chain_mdp, enumeration_mdp, load_benchmark, random_mdp
from app.mdp.core import TabularMdp, load_mdp, save_mdp, validate
from app.mdp.dp import (
    ExactQuantities,
    exact_gradient,
    exact_quantities,
    exact_return,
    exact_truncated_gradient,
    exact_values,
    mismatch_coefficient,
    occupancy_measure,
    optimal_values,
)
from app.mdp.sampling import (
    Trajectory,
    TrajectoryBatch,
    sample_batch,
    sample_trajectory,
)


__all__ = [
    "ExactQuantities",
    "TabularMdp",
    "Trajectory",
    "TrajectoryBatch",
    "chain_mdp",
    "enumeration_mdp",
    "exact_gradient",
    "exact_quantities",
    "exact_return",
    "exact_truncated_gradient",
    "exact_values",
    "load_benchmark",
    "load_mdp",
    "mismatch_coefficient",
    "occupancy_measure",
    "optimal_values",
    "random_mdp",
    "sample_batch",
    "sample_trajectory",
    "save_mdp",
    "validate",
]
