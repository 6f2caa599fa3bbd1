"""小批量策略梯度估计器。

所有估计器先在 (m, H) 数组上向量化地算出每条轨迹的估计 (m, d)，批量估计
就是它们的均值，因此批量估计对轨迹顺序与拆分方式保持线性。
"""
from typing import Callable, Dict, Optional

import numpy as np

from app.estimator.base import EstimatorConfig, GradientEstimate
from app.mdp.sampling import BatchLike, TrajectoryBatch, as_batch
from app.objectives import barrier_gradient_term, require_softmax
from app.policy.base import BasePolicy
from app.schema import EstimatorKind


Kernel = Callable[[TrajectoryBatch, BasePolicy, float, float], np.ndarray]


def trajectory_scores(batch: TrajectoryBatch, policy: BasePolicy) -> np.ndarray:
    """∇ log π(a_t|s_t)，形状 (m, H, d)"""
    return policy.score_table()[batch.states, batch.actions]


def discounts(gamma: float, horizon: int) -> np.ndarray:
    return gamma ** np.arange(horizon)


def reinforce_kernel(
    batch: TrajectoryBatch, policy: BasePolicy, gamma: float, lam: float = 0.0
) -> np.ndarray:
    """(Σ_t score_t)(Σ_t γ^t r_t)"""
    scores = trajectory_scores(batch, policy)
    returns = batch.rewards @ discounts(gamma, batch.horizon)
    return scores.sum(axis=1) * returns[:, None]


def gpomdp_kernel(
    batch: TrajectoryBatch,
    policy: BasePolicy,
    gamma: float,
    lam: float = 0.0,
    rewards: Optional[np.ndarray] = None,
) -> np.ndarray:
    """Σ_t (Σ_{k≤t} score_k) γ^t r_t"""
    scores = trajectory_scores(batch, policy)
    r = batch.rewards if rewards is None else rewards
    causal = np.cumsum(scores, axis=1)
    return np.einsum("mt,mtd->md", r * discounts(gamma, batch.horizon), causal)


def pgt_kernel(
    batch: TrajectoryBatch, policy: BasePolicy, gamma: float, lam: float = 0.0
) -> np.ndarray:
    """Σ_t score_t Σ_{t'≥t} γ^{t'} r_{t'}"""
    scores = trajectory_scores(batch, policy)
    weighted = batch.rewards * discounts(gamma, batch.horizon)
    to_go = np.cumsum(weighted[:, ::-1], axis=1)[:, ::-1]
    return np.einsum("mt,mtd->md", to_go, scores)


def _barrier(base: Kernel) -> Kernel:
    def kernel(
        batch: TrajectoryBatch, policy: BasePolicy, gamma: float, lam: float = 0.0
    ) -> np.ndarray:
        policy = require_softmax(policy, "barrier estimator")
        return base(batch, policy, gamma) + barrier_gradient_term(policy, lam)

    return kernel


def entropy_kernel(
    batch: TrajectoryBatch, policy: BasePolicy, gamma: float, lam: float = 0.0
) -> np.ndarray:
    """Σ_t γ^t [(r_t − λ log π_t) Σ_{k≤t} score_k − λ score_t]"""
    policy = require_softmax(policy, "entropy estimator")
    log_probs = policy.log_prob_table()[batch.states, batch.actions]
    shaped = gpomdp_kernel(batch, policy, gamma, rewards=batch.rewards - lam * log_probs)
    scores = trajectory_scores(batch, policy)
    direct = np.einsum("t,mtd->md", discounts(gamma, batch.horizon), scores)
    return shaped - lam * direct


KERNELS: Dict[EstimatorKind, Kernel] = {
    EstimatorKind.REINFORCE: reinforce_kernel,
    EstimatorKind.GPOMDP: gpomdp_kernel,
    EstimatorKind.PGT: pgt_kernel,
    EstimatorKind.BARRIER_REINFORCE: _barrier(reinforce_kernel),
    EstimatorKind.BARRIER_GPOMDP: _barrier(gpomdp_kernel),
    EstimatorKind.ENTROPY: entropy_kernel,
}


def per_trajectory(
    kind: EstimatorKind,
    batch: BatchLike,
    policy: BasePolicy,
    gamma: float,
    lam: float = 0.0,
    kernel: Optional[Kernel] = None,
) -> np.ndarray:
    """每条轨迹单独的估计，形状 (m, d)；kernel 可替换默认实现"""
    batch = as_batch(batch)
    return (kernel or KERNELS[kind])(batch, policy, gamma, lam)


def _wrap(kind: EstimatorKind, batch: TrajectoryBatch, grad: np.ndarray) -> GradientEstimate:
    return GradientEstimate(
        grad=grad,
        estimator_kind=kind,
        batch_size=batch.size,
        horizon=batch.horizon,
        seeds=list(batch.seeds),
    )


def estimate(
    kind: EstimatorKind,
    batch: BatchLike,
    policy: BasePolicy,
    gamma: float,
    lam: float = 0.0,
    kernel: Optional[Kernel] = None,
) -> GradientEstimate:
    """批量估计 = 每条轨迹估计的均值"""
    batch = as_batch(batch)
    grad = per_trajectory(kind, batch, policy, gamma, lam, kernel).mean(axis=0)
    return _wrap(kind, batch, grad)


def estimate_with(
    estimator: EstimatorConfig, batch: BatchLike, policy: BasePolicy, gamma: float
) -> GradientEstimate:
    batch = as_batch(batch)
    if batch.horizon != estimator.horizon:
        raise ValueError(
            f"batch horizon {batch.horizon} does not match estimator horizon {estimator.horizon}"
        )
    return estimate(estimator.kind, batch, policy, gamma, estimator.lam)


def reinforce(batch: BatchLike, policy: BasePolicy, gamma: float) -> GradientEstimate:
    return estimate(EstimatorKind.REINFORCE, batch, policy, gamma)


def gpomdp(batch: BatchLike, policy: BasePolicy, gamma: float) -> GradientEstimate:
    return estimate(EstimatorKind.GPOMDP, batch, policy, gamma)


def pgt(batch: BatchLike, policy: BasePolicy, gamma: float) -> GradientEstimate:
    """与 GPOMDP 逐条轨迹代数相等"""
    return estimate(EstimatorKind.PGT, batch, policy, gamma)


def barrier_estimate(
    base: EstimatorKind, batch: BatchLike, policy: BasePolicy, gamma: float, lam: float
) -> GradientEstimate:
    """基础估计加上确定性的障碍梯度项"""
    kinds = {
        EstimatorKind.REINFORCE: EstimatorKind.BARRIER_REINFORCE,
        EstimatorKind.GPOMDP: EstimatorKind.BARRIER_GPOMDP,
    }
    if base not in kinds:
        raise ValueError(f"barrier estimator base must be reinforce or gpomdp, got {base.value}")
    return estimate(kinds[base], batch, policy, gamma, lam)


def entropy_estimate(
    batch: BatchLike, policy: BasePolicy, gamma: float, lam: float
) -> GradientEstimate:
    return estimate(EstimatorKind.ENTROPY, batch, policy, gamma, lam)
