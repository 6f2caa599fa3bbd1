"""故意写错的估计器核，作为检查的负向测试。

每个变异只替换一种估计器的核；被它针对的检查必须判为失败。
"""
from typing import Dict, List

import numpy as np
from pydantic import BaseModel

from app.estimator.estimators import (
    Kernel,
    discounts,
    gpomdp_kernel,
    trajectory_scores,
)
from app.exceptions import ConfigError
from app.mdp.sampling import TrajectoryBatch
from app.objectives import require_softmax
from app.policy.base import BasePolicy
from app.schema import EstimatorKind


def off_by_one_discount(
    batch: TrajectoryBatch, policy: BasePolicy, gamma: float, lam: float = 0.0
) -> np.ndarray:
    """GPOMDP，但奖励按 γ^{t+1} 折扣"""
    return gamma * gpomdp_kernel(batch, policy, gamma)


def drop_causal_mask(
    batch: TrajectoryBatch, policy: BasePolicy, gamma: float, lam: float = 0.0
) -> np.ndarray:
    """PGT，但每个 score 乘以整条轨迹的回报而不是 reward-to-go"""
    scores = trajectory_scores(batch, policy)
    returns = batch.rewards @ discounts(gamma, batch.horizon)
    return np.einsum("m,mtd->md", returns, scores)


def wrong_lambda_scale(
    batch: TrajectoryBatch, policy: BasePolicy, gamma: float, lam: float = 0.0
) -> np.ndarray:
    """障碍项按 λ/(|S||A|) 而不是 λ/|S| 缩放"""
    policy = require_softmax(policy, "barrier estimator")
    scale = lam / (policy.num_states * policy.num_actions)
    term = scale * (1.0 / policy.num_actions - policy.stacked_probs())
    return gpomdp_kernel(batch, policy, gamma) + term


class Mutation(BaseModel):
    name: str
    kind: EstimatorKind
    kernel: Kernel
    target_check: str

    class Config:
        arbitrary_types_allowed = True


MUTATIONS: Dict[str, Mutation] = {
    mutation.name: mutation
    for mutation in (
        Mutation(
            name="off_by_one_discount",
            kind=EstimatorKind.GPOMDP,
            kernel=off_by_one_discount,
            target_check="unbiasedness",
        ),
        Mutation(
            name="drop_causal_mask",
            kind=EstimatorKind.PGT,
            kernel=drop_causal_mask,
            target_check="pgt_equivalence",
        ),
        Mutation(
            name="wrong_lambda_scale",
            kind=EstimatorKind.BARRIER_GPOMDP,
            kernel=wrong_lambda_scale,
            target_check="unbiasedness",
        ),
    )
}


def mutation_names() -> List[str]:
    return sorted(MUTATIONS)


def get_mutation(name: str) -> Mutation:
    if name not in MUTATIONS:
        raise ConfigError(
            f"unknown mutation '{name}', available: {', '.join(mutation_names())}",
            path="/mutation",
        )
    return MUTATIONS[name]
