"""长度为 H 的全部轨迹的完全枚举，用作估计器期望的精确预言机。"""
from typing import Optional, Tuple

import numpy as np

from app.config import config
from app.estimator.estimators import Kernel, per_trajectory
from app.exceptions import EnumerationTooLargeError
from app.mdp.core import TabularMdp
from app.mdp.sampling import TrajectoryBatch
from app.policy.base import BasePolicy
from app.schema import EstimatorKind


def path_count(mdp: TabularMdp, horizon: int) -> int:
    return (mdp.num_states * mdp.num_actions) ** horizon


def enumerate_paths(
    mdp: TabularMdp, policy: BasePolicy, horizon: int, limit: Optional[int] = None
) -> Tuple[TrajectoryBatch, np.ndarray]:
    """返回全部路径组成的批次及其概率 ρ(s_0)·Π π(a_t|s_t)·Π P(s_{t+1}|s_t, a_t)"""
    limit = config.verify.enumeration_limit if limit is None else limit
    count = path_count(mdp, horizon)
    if count > limit:
        raise EnumerationTooLargeError(
            f"{count} paths of length {horizon} exceed the enumeration limit {limit}; "
            "use the Monte-Carlo checks (check_abc / moment_survey) instead"
        )

    shape = (mdp.num_states, mdp.num_actions) * horizon
    index = np.unravel_index(np.arange(count), shape)
    states = np.stack(index[0::2], axis=1)
    actions = np.stack(index[1::2], axis=1)

    probs = policy.action_matrix()
    weights = mdp.initial_dist[states[:, 0]] * np.prod(probs[states, actions], axis=1)
    if horizon > 1:
        steps = mdp.transitions[states[:, :-1], actions[:, :-1], states[:, 1:]]
        weights = weights * np.prod(steps, axis=1)

    batch = TrajectoryBatch(
        states=states,
        actions=actions,
        rewards=mdp.rewards[states, actions],
        seeds=[],
    )
    return batch, weights


def exact_expectation(
    kind: EstimatorKind,
    mdp: TabularMdp,
    policy: BasePolicy,
    horizon: int,
    lam: float = 0.0,
    kernel: Optional[Kernel] = None,
    limit: Optional[int] = None,
) -> np.ndarray:
    """单条轨迹估计在全部路径上的概率加权和"""
    batch, weights = enumerate_paths(mdp, policy, horizon, limit)
    return weights @ per_trajectory(kind, batch, policy, mdp.gamma, lam, kernel)
