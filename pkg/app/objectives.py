"""三种目标函数的精确值与梯度：J、对数障碍 L_λ、熵正则 J̃。"""
import math
from typing import Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from app.exceptions import PolicyFamilyError
from app.mdp.core import TabularMdp
from app.mdp.dp import (
    exact_gradient,
    exact_return,
    exact_truncated_gradient,
    forward_marginals,
    optimal_values,
    state_occupancy,
)
from app.policy.base import BasePolicy
from app.policy.softmax import SoftmaxTabularPolicy
from app.schema import ObjectiveKind


class ObjectiveSpec(BaseModel):
    """目标函数规格，JSON 形式为 {"objective": ..., "lambda": ...}"""

    model_config = ConfigDict(populate_by_name=True)

    kind: ObjectiveKind = Field(ObjectiveKind.PLAIN, alias="objective")
    lam: float = Field(0.0, alias="lambda", ge=0.0)

    @model_validator(mode="after")
    def _plain_has_no_lambda(self) -> "ObjectiveSpec":
        if self.kind == ObjectiveKind.PLAIN and self.lam != 0.0:
            self.lam = 0.0
        return self

    @property
    def regularized(self) -> bool:
        return self.kind != ObjectiveKind.PLAIN

    def to_json_dict(self) -> dict:
        return {"objective": self.kind.value, "lambda": self.lam}


PLAIN = ObjectiveSpec()


def require_softmax(policy: BasePolicy, what: str) -> SoftmaxTabularPolicy:
    if not isinstance(policy, SoftmaxTabularPolicy):
        raise PolicyFamilyError(
            f"{what} is only defined for softmax_tabular policies, got {policy.family.value}"
        )
    return policy


def barrier_gradient_term(policy: SoftmaxTabularPolicy, lam: float) -> np.ndarray:
    """(λ/|S|)(𝟏/|A| − 堆叠的 π_s)，与轨迹无关"""
    return (lam / policy.num_states) * (1.0 / policy.num_actions - policy.stacked_probs())


def barrier_value_term(policy: SoftmaxTabularPolicy, lam: float) -> float:
    """λ/(|A||S|) Σ log π + λ log|A|"""
    n = policy.num_states * policy.num_actions
    return lam / n * float(np.sum(policy.log_prob_table())) + lam * math.log(
        policy.num_actions
    )


def entropy_rewards(mdp: TabularMdp, policy: SoftmaxTabularPolicy, lam: float) -> np.ndarray:
    """r̃(s, a) = r(s, a) − λ log π(a|s)"""
    return mdp.rewards - lam * policy.log_prob_table()


def objective_value(
    spec: ObjectiveSpec,
    mdp: TabularMdp,
    policy: BasePolicy,
    tol: Optional[float] = None,
    method: Optional[str] = None,
) -> float:
    j = exact_return(mdp, policy, tol, method)
    if spec.kind == ObjectiveKind.PLAIN:
        return j
    if spec.kind == ObjectiveKind.LOG_BARRIER:
        policy = require_softmax(policy, "log-barrier objective")
        return j + barrier_value_term(policy, spec.lam)

    policy = require_softmax(policy, "entropy objective")
    probs = policy.action_matrix()
    occupancy = state_occupancy(mdp, probs, tol, method)[:, None] * probs
    # 占用测度对偶式计算折扣熵
    return j - spec.lam * float(np.sum(occupancy * policy.log_prob_table())) / (
        1.0 - mdp.gamma
    )


def exact_objective_gradient(
    spec: ObjectiveSpec,
    mdp: TabularMdp,
    policy: BasePolicy,
    tol: Optional[float] = None,
    method: Optional[str] = None,
) -> np.ndarray:
    if spec.kind == ObjectiveKind.PLAIN:
        return exact_gradient(mdp, policy, tol, method)
    if spec.kind == ObjectiveKind.LOG_BARRIER:
        policy = require_softmax(policy, "log-barrier objective")
        return exact_gradient(mdp, policy, tol, method) + barrier_gradient_term(
            policy, spec.lam
        )

    policy = require_softmax(policy, "entropy objective")
    # r̃ 依赖 θ，每次调用都在 r̃ 下重新求解 Q̃
    modified = exact_gradient(
        mdp, policy, tol, method, rewards=entropy_rewards(mdp, policy, spec.lam)
    )
    probs = policy.action_matrix()
    occupancy = state_occupancy(mdp, probs, tol, method)[:, None] * probs
    direct = np.einsum("sa,sad->d", occupancy, policy.score_table()) / (1.0 - mdp.gamma)
    return modified - spec.lam * direct


def exact_truncated_objective_gradient(
    spec: ObjectiveSpec, mdp: TabularMdp, policy: BasePolicy, horizon: int
) -> np.ndarray:
    if spec.kind == ObjectiveKind.PLAIN:
        return exact_truncated_gradient(mdp, policy, horizon)
    if spec.kind == ObjectiveKind.LOG_BARRIER:
        policy = require_softmax(policy, "log-barrier objective")
        # 正则项与轨迹无关，截断不影响它
        return exact_truncated_gradient(mdp, policy, horizon) + barrier_gradient_term(
            policy, spec.lam
        )

    policy = require_softmax(policy, "entropy objective")
    modified = exact_truncated_gradient(
        mdp, policy, horizon, rewards=entropy_rewards(mdp, policy, spec.lam)
    )
    marginals = forward_marginals(mdp, policy.action_matrix(), horizon)
    discounts = mdp.gamma ** np.arange(horizon)
    weights = np.einsum("k,ksa->sa", discounts, marginals)
    direct = np.einsum("sa,sad->d", weights, policy.score_table())
    return modified - spec.lam * direct


def truncated_objective_value(
    spec: ObjectiveSpec, mdp: TabularMdp, policy: BasePolicy, horizon: int
) -> float:
    """E[Σ_{t<H} γ^t r̃_t] 形式的截断目标值（障碍项不截断）"""
    probs = policy.action_matrix()
    marginals = forward_marginals(mdp, probs, horizon)
    discounts = mdp.gamma ** np.arange(horizon)
    weights = np.einsum("k,ksa->sa", discounts, marginals)
    if spec.kind == ObjectiveKind.ENTROPY:
        policy = require_softmax(policy, "entropy objective")
        return float(np.sum(weights * entropy_rewards(mdp, policy, spec.lam)))
    value = float(np.sum(weights * mdp.rewards))
    if spec.kind == ObjectiveKind.LOG_BARRIER:
        policy = require_softmax(policy, "log-barrier objective")
        value += barrier_value_term(policy, spec.lam)
    return value


def objective_gap_bound(
    spec: ObjectiveSpec, mdp: TabularMdp, tol: Optional[float] = None
) -> float:
    """目标最优值的可计算上界。

    障碍项恒 ≤ 0，所以 L_λ* ≤ J*；折扣熵 ≤ λ log|A|/(1−γ)。
    """
    j_star = optimal_values(mdp, tol).j
    if spec.kind == ObjectiveKind.ENTROPY:
        return j_star + spec.lam * math.log(mdp.num_actions) / (1.0 - mdp.gamma)
    return j_star
