"""批量估计的矩调查：对 ĝ 的一阶矩、二阶矩与方差做蒙特卡洛估计。

第 j 个批量估计的第 i 条轨迹种子为 split(base_seed, j, i)。样本按固定大小
分块，块内做 Welford 累积，块间按块序号用 Chan 公式合并，因此结果与线程数
无关。
"""
from concurrent.futures import ThreadPoolExecutor
from typing import List, Optional

from app.config import config
from app.estimator.base import EstimatorConfig, MomentStats, WelfordState
from app.estimator.estimators import Kernel, per_trajectory
from app.logger import logger
from app.mdp.core import TabularMdp
from app.mdp.sampling import rollout
from app.policy.base import BasePolicy
from app.utils.seeding import split_seed


MIN_SURVEY_SAMPLES = 100


def _survey_chunk(
    mdp: TabularMdp,
    policy: BasePolicy,
    estimator: EstimatorConfig,
    base_seed: int,
    sample_ids: range,
    kernel: Optional[Kernel],
) -> WelfordState:
    m = estimator.m
    seeds = [split_seed(base_seed, j, i) for j in sample_ids for i in range(m)]
    batch = rollout(mdp, policy, estimator.horizon, seeds)
    per_traj = per_trajectory(
        estimator.kind, batch, policy, mdp.gamma, estimator.lam, kernel
    )
    estimates = per_traj.reshape(len(sample_ids), m, -1).mean(axis=1)

    state = WelfordState(estimates.shape[1])
    for sample in estimates:
        state.update(sample)
    return state


def moment_survey(
    mdp: TabularMdp,
    policy: BasePolicy,
    estimator: EstimatorConfig,
    n_samples: int,
    base_seed: int,
    jobs: Optional[int] = None,
    kernel: Optional[Kernel] = None,
) -> MomentStats:
    """抽取 n_samples 个独立的批量估计并汇总其矩"""
    if n_samples < MIN_SURVEY_SAMPLES:
        raise ValueError(
            f"moment survey needs at least {MIN_SURVEY_SAMPLES} samples, got {n_samples}"
        )
    jobs = config.sampling.jobs if jobs is None else jobs
    chunk_size = config.sampling.chunk_size
    chunks: List[range] = [
        range(start, min(start + chunk_size, n_samples))
        for start in range(0, n_samples, chunk_size)
    ]

    def run(ids: range) -> WelfordState:
        return _survey_chunk(mdp, policy, estimator, base_seed, ids, kernel)

    if jobs <= 1 or len(chunks) == 1:
        states = [run(ids) for ids in chunks]
    else:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            states = list(pool.map(run, chunks))

    total = states[0]
    for state in states[1:]:
        total = total.merge(state)

    stats = total.to_stats(
        extra={
            "estimator": estimator.kind.value,
            "m": estimator.m,
            "H": estimator.horizon,
            "lambda": estimator.lam,
            "base_seed": base_seed,
        }
    )
    logger.debug(
        f"Moment survey {estimator.kind.value} m={estimator.m} H={estimator.horizon}: "
        f"E|g|^2={stats.second_moment:.6g}, Var={stats.variance:.6g} over {n_samples} samples"
    )
    return stats
