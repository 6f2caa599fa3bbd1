"""轨迹采样。

每条轨迹从自己的 64 位种子构造 Philox 生成器，并一次性取出 2H 个均匀数：
u[0] 决定 s_0，u[2t+1] 决定 a_t，u[2t+2] 决定 s_{t+1}。状态推进在一个批次内
向量化进行，因此一条轨迹只取决于 (mdp, policy, horizon, seed)。
"""
from concurrent.futures import ThreadPoolExecutor
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, Field

from app.config import config
from app.mdp.core import TabularMdp
from app.policy.base import BasePolicy
from app.utils.seeding import make_rng, split_seed


class Trajectory(BaseModel):
    """长度恰为 H 的一条截断轨迹"""

    states: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray
    horizon: int = Field(..., gt=0)
    seed: int

    class Config:
        arbitrary_types_allowed = True

    @property
    def steps(self) -> List[Tuple[int, int, float]]:
        return [
            (int(s), int(a), float(r))
            for s, a, r in zip(self.states, self.actions, self.rewards)
        ]

    def __len__(self) -> int:
        return self.horizon


class TrajectoryBatch(BaseModel):
    """m 条共享同一 H 的轨迹，按 (m, H) 数组存放"""

    states: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray
    seeds: List[int] = Field(default_factory=list)

    class Config:
        arbitrary_types_allowed = True

    @property
    def size(self) -> int:
        return int(self.states.shape[0])

    @property
    def horizon(self) -> int:
        return int(self.states.shape[1])

    @classmethod
    def from_trajectories(cls, batch: Sequence[Trajectory]) -> "TrajectoryBatch":
        if not batch:
            raise ValueError("Cannot build an empty trajectory batch")
        horizons = {traj.horizon for traj in batch}
        if len(horizons) != 1:
            raise ValueError(
                f"All trajectories in a batch must share one horizon, got {sorted(horizons)}"
            )
        return cls(
            states=np.stack([traj.states for traj in batch]),
            actions=np.stack([traj.actions for traj in batch]),
            rewards=np.stack([traj.rewards for traj in batch]),
            seeds=[traj.seed for traj in batch],
        )

    def to_trajectories(self) -> List[Trajectory]:
        return [
            Trajectory(
                states=self.states[i],
                actions=self.actions[i],
                rewards=self.rewards[i],
                horizon=self.horizon,
                seed=self.seeds[i] if self.seeds else 0,
            )
            for i in range(self.size)
        ]


BatchLike = Union[TrajectoryBatch, Sequence[Trajectory]]


def as_batch(batch: BatchLike) -> TrajectoryBatch:
    if isinstance(batch, TrajectoryBatch):
        return batch
    return TrajectoryBatch.from_trajectories(list(batch))


def _normalized_cdf(probs: np.ndarray) -> np.ndarray:
    # 最后一项恰为 1.0，u < 1 时不会落到概率为 0 的尾部
    cdf = np.cumsum(probs, axis=-1)
    return cdf / cdf[..., -1:]


def _draw(cdf_rows: np.ndarray, u: np.ndarray) -> np.ndarray:
    return np.minimum((cdf_rows <= u[:, None]).sum(axis=1), cdf_rows.shape[1] - 1)


def rollout(
    mdp: TabularMdp, policy: BasePolicy, horizon: int, seeds: Sequence[int]
) -> TrajectoryBatch:
    """按给定种子列表采样一批轨迹"""
    if horizon < 1:
        raise ValueError(f"horizon must be >= 1, got {horizon}")
    seeds = [int(seed) for seed in seeds]
    uniforms = np.stack([make_rng(seed).random(2 * horizon) for seed in seeds])

    init_cdf = _normalized_cdf(mdp.initial_dist)
    policy_cdf = _normalized_cdf(policy.action_matrix())
    transition_cdf = _normalized_cdf(mdp.transitions)

    m = len(seeds)
    states = np.empty((m, horizon), dtype=np.int64)
    actions = np.empty((m, horizon), dtype=np.int64)
    s = _draw(np.broadcast_to(init_cdf, (m, mdp.num_states)), uniforms[:, 0])
    for t in range(horizon):
        states[:, t] = s
        a = _draw(policy_cdf[s], uniforms[:, 2 * t + 1])
        actions[:, t] = a
        if t + 1 < horizon:
            s = _draw(transition_cdf[s, a], uniforms[:, 2 * t + 2])

    return TrajectoryBatch(
        states=states,
        actions=actions,
        rewards=mdp.rewards[states, actions],
        seeds=seeds,
    )


def sample_trajectory(
    mdp: TabularMdp, policy: BasePolicy, horizon: int, seed: int
) -> Trajectory:
    """s_0 ~ ρ, a_t ~ π(·|s_t), s_{t+1} ~ P(·|s_t, a_t)；同一种子得到逐位相同的轨迹"""
    return rollout(mdp, policy, horizon, [seed]).to_trajectories()[0]


def batch_seeds(base_seed: int, m: int, *prefix: int) -> List[int]:
    """第 i 条轨迹的种子为 split(base_seed, *prefix, i)"""
    return [split_seed(base_seed, *prefix, i) for i in range(m)]


def sample_batch(
    mdp: TabularMdp,
    policy: BasePolicy,
    horizon: int,
    m: int,
    base_seed: int,
    prefix: Tuple[int, ...] = (),
    jobs: Optional[int] = None,
) -> TrajectoryBatch:
    """采样 m 条轨迹；jobs > 1 时按轨迹分片并发，结果与线程数无关"""
    seeds = batch_seeds(base_seed, m, *prefix)
    jobs = config.sampling.jobs if jobs is None else jobs
    if jobs <= 1 or m < 2 * jobs:
        return rollout(mdp, policy, horizon, seeds)

    shards = [seeds[i::jobs] for i in range(jobs)]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        parts = list(pool.map(lambda chunk: rollout(mdp, policy, horizon, chunk), shards))

    # 还原为原始轨迹顺序
    order = np.argsort(np.concatenate([np.arange(m)[i::jobs] for i in range(jobs)]))
    stack = lambda field: np.concatenate([getattr(p, field) for p in parts])[order]
    return TrajectoryBatch(
        states=stack("states"),
        actions=stack("actions"),
        rewards=stack("rewards"),
        seeds=seeds,
    )


def empirical_occupancy(
    batch: BatchLike, num_states: int, num_actions: int, gamma: float
) -> np.ndarray:
    """(1−γ)/m · Σ_i Σ_t γ^t 1{(s_t, a_t) = (s, a)}（截断到 H）"""
    batch = as_batch(batch)
    discounts = gamma ** np.arange(batch.horizon)
    table = np.zeros((num_states, num_actions))
    weights = np.broadcast_to(discounts, batch.states.shape)
    np.add.at(table, (batch.states, batch.actions), weights)
    return (1.0 - gamma) * table / batch.size
