"""表格 MDP 的精确动态规划预言机。

默认用不动点迭代求解，迭代上限由收缩率解析给出；稠密线性求解保留为
测试预言机（method="direct"）。所有函数都是纯函数，可并发调用。
"""
import math
from typing import NamedTuple, Optional

import numpy as np
from pydantic import BaseModel

from app.config import config
from app.exceptions import ConvergenceError, InvalidMdpError
from app.logger import logger
from app.mdp.core import TabularMdp
from app.policy.base import BasePolicy


class ValueFunctions(NamedTuple):
    v: np.ndarray
    q: np.ndarray
    advantage: np.ndarray


class OptimalSolution(NamedTuple):
    v: np.ndarray
    q: np.ndarray
    policy: np.ndarray
    j: float


class ExactQuantities(BaseModel):
    """固定策略下由 DP 计算的全部精确量"""

    v: np.ndarray
    q: np.ndarray
    advantage: np.ndarray
    occupancy: np.ndarray
    j: float
    grad_j: np.ndarray
    grad_j_h: np.ndarray
    horizon: int

    class Config:
        arbitrary_types_allowed = True


def _resolve(tol: Optional[float], method: Optional[str]) -> tuple:
    return (
        config.dp.tol if tol is None else tol,
        config.dp.method if method is None else method,
    )


def iteration_cap(gamma: float, tol: float, scale: float) -> int:
    """从零初始化、误差初值为 scale 时达到 tol 所需的迭代上限"""
    margin = config.dp.iteration_margin
    if gamma == 0.0 or scale <= 0.0:
        return 1 + margin
    ratio = tol * (1.0 - gamma) / scale
    if ratio >= 1.0:
        return 1 + margin
    return math.ceil(math.log(ratio) / math.log(gamma)) + margin


def _policy_transitions(mdp: TabularMdp, probs: np.ndarray) -> np.ndarray:
    """P_π(s, s') = Σ_a π(a|s) P(s'|s, a)"""
    return np.einsum("sa,sat->st", probs, mdp.transitions)


def _fixed_point(step, x0: np.ndarray, gamma: float, tol: float, cap: int, ord=np.inf):
    x = x0
    for _ in range(cap):
        x_next = step(x)
        gap = float(np.linalg.norm((x_next - x).ravel(), ord=ord))
        x = x_next
        if gamma * gap <= tol * (1.0 - gamma):
            return x
    raise ConvergenceError(
        f"fixed-point iteration did not reach tol={tol:g} within {cap} iterations; "
        "tol is too tight for the contraction rate"
    )


def evaluate_q(
    mdp: TabularMdp,
    probs: np.ndarray,
    rewards: Optional[np.ndarray] = None,
    tol: Optional[float] = None,
    method: Optional[str] = None,
) -> np.ndarray:
    """求解 q = r + γ P (Π q)"""
    tol, method = _resolve(tol, method)
    r = mdp.rewards if rewards is None else rewards
    if method == "direct":
        return solve_values_direct(mdp, probs, r).q

    flat_p = mdp.transitions.reshape(-1, mdp.num_states)

    def bellman(q: np.ndarray) -> np.ndarray:
        v = np.sum(probs * q, axis=1)
        return r + mdp.gamma * (flat_p @ v).reshape(r.shape)

    scale = 2.0 * float(np.max(np.abs(r), initial=0.0))
    cap = iteration_cap(mdp.gamma, tol, scale)
    return _fixed_point(bellman, np.zeros_like(r), mdp.gamma, tol, cap)


def solve_values_direct(
    mdp: TabularMdp, probs: np.ndarray, rewards: Optional[np.ndarray] = None
) -> ValueFunctions:
    """稠密线性求解 (I − γ P_π) v = r_π"""
    r = mdp.rewards if rewards is None else rewards
    p_pi = _policy_transitions(mdp, probs)
    r_pi = np.sum(probs * r, axis=1)
    v = np.linalg.solve(np.eye(mdp.num_states) - mdp.gamma * p_pi, r_pi)
    q = r + mdp.gamma * mdp.transitions @ v
    return ValueFunctions(v=v, q=q, advantage=q - v[:, None])


def exact_values(
    mdp: TabularMdp,
    policy: BasePolicy,
    tol: Optional[float] = None,
    method: Optional[str] = None,
) -> ValueFunctions:
    """返回 (v, q, advantage)"""
    probs = policy.action_matrix()
    q = evaluate_q(mdp, probs, tol=tol, method=method)
    v = np.sum(probs * q, axis=1)
    return ValueFunctions(v=v, q=q, advantage=q - v[:, None])


def state_occupancy(
    mdp: TabularMdp,
    probs: np.ndarray,
    tol: Optional[float] = None,
    method: Optional[str] = None,
) -> np.ndarray:
    """d(s) = (1−γ) Σ_t γ^t P(s_t = s)"""
    tol, method = _resolve(tol, method)
    p_pi = _policy_transitions(mdp, probs)
    rho = mdp.initial_dist
    if method == "direct":
        return np.linalg.solve(
            np.eye(mdp.num_states) - mdp.gamma * p_pi.T, (1.0 - mdp.gamma) * rho
        )

    # 从 ρ 出发，每次迭代都保持总质量为 1
    def propagate(d: np.ndarray) -> np.ndarray:
        return (1.0 - mdp.gamma) * rho + mdp.gamma * (p_pi.T @ d)

    cap = iteration_cap(mdp.gamma, tol, 2.0)
    return _fixed_point(propagate, rho.copy(), mdp.gamma, tol, cap, ord=1)


def occupancy_measure(
    mdp: TabularMdp,
    policy: BasePolicy,
    tol: Optional[float] = None,
    method: Optional[str] = None,
) -> np.ndarray:
    """状态-动作访问测度 (1−γ) Σ_t γ^t P(s_t = s, a_t = a)"""
    probs = policy.action_matrix()
    return state_occupancy(mdp, probs, tol, method)[:, None] * probs


def exact_return(
    mdp: TabularMdp,
    policy: BasePolicy,
    tol: Optional[float] = None,
    method: Optional[str] = None,
) -> float:
    """J = Σ_s ρ(s) v(s)，并与占用测度对偶式交叉验证"""
    values = exact_values(mdp, policy, tol, method)
    j_primal = float(np.dot(mdp.initial_dist, values.v))
    occupancy = occupancy_measure(mdp, policy, tol, method)
    j_dual = float(np.sum(occupancy * mdp.rewards)) / (1.0 - mdp.gamma)
    if abs(j_primal - j_dual) > 1e-9 * max(1.0, abs(j_primal)):
        raise ConvergenceError(
            f"return duality violated: rho·v = {j_primal!r}, "
            f"occupancy·r/(1-gamma) = {j_dual!r}"
        )
    return j_primal


def exact_gradient(
    mdp: TabularMdp,
    policy: BasePolicy,
    tol: Optional[float] = None,
    method: Optional[str] = None,
    rewards: Optional[np.ndarray] = None,
) -> np.ndarray:
    """策略梯度定理：∇J = 1/(1−γ) Σ_{s,a} occupancy·q·score"""
    scores = policy.score_table()
    probs = policy.action_matrix()
    q = evaluate_q(mdp, probs, rewards=rewards, tol=tol, method=method)
    occupancy = state_occupancy(mdp, probs, tol, method)[:, None] * probs
    return np.einsum("sa,sad->d", occupancy * q, scores) / (1.0 - mdp.gamma)


def forward_marginals(mdp: TabularMdp, probs: np.ndarray, horizon: int) -> np.ndarray:
    """μ_k(s, a)，k = 0..H−1，形状 (H, S, A)"""
    marginals = np.empty((horizon, mdp.num_states, mdp.num_actions))
    mu = mdp.initial_dist[:, None] * probs
    for k in range(horizon):
        marginals[k] = mu
        next_states = np.einsum("sa,sat->t", mu, mdp.transitions)
        mu = next_states[:, None] * probs
    return marginals


def state_marginals(mdp: TabularMdp, policy: BasePolicy, horizon: int) -> np.ndarray:
    """P(s_t = s)，t = 0..H−1，形状 (H, S)"""
    return forward_marginals(mdp, policy.action_matrix(), horizon).sum(axis=2)


def truncated_q(
    mdp: TabularMdp,
    probs: np.ndarray,
    horizon: int,
    rewards: Optional[np.ndarray] = None,
) -> np.ndarray:
    """一次反向递推得到全部 Q^{(h)}，h = 1..H；第 h−1 个切片是 Q^{(h)}"""
    r = mdp.rewards if rewards is None else rewards
    table = np.empty((horizon,) + r.shape)
    q = r.copy()
    for h in range(horizon):
        table[h] = q
        q = r + mdp.gamma * mdp.transitions @ np.sum(probs * q, axis=1)
    return table


def exact_truncated_gradient(
    mdp: TabularMdp,
    policy: BasePolicy,
    horizon: int,
    rewards: Optional[np.ndarray] = None,
) -> np.ndarray:
    """∇J_H = Σ_{k<H} γ^k Σ_{s,a} μ_k(s,a) · score(s,a) · Q^{(H−k)}(s,a)"""
    if horizon < 1:
        raise ValueError(f"horizon must be >= 1, got {horizon}")
    scores = policy.score_table()
    probs = policy.action_matrix()
    marginals = forward_marginals(mdp, probs, horizon)
    q_table = truncated_q(mdp, probs, horizon, rewards)
    discounts = mdp.gamma ** np.arange(horizon)
    # Q^{(H−k)} 位于 q_table[H−k−1]
    weights = np.einsum("k,ksa,ksa->sa", discounts, marginals, q_table[::-1])
    return np.einsum("sa,sad->d", weights, scores)


def optimal_values(mdp: TabularMdp, tol: Optional[float] = None) -> OptimalSolution:
    """值迭代求 V*、Q*、贪心确定性策略 π* 与 J*（并列时取最小动作下标）"""
    tol = config.dp.tol if tol is None else tol
    flat_p = mdp.transitions.reshape(-1, mdp.num_states)

    def bellman_optimality(v: np.ndarray) -> np.ndarray:
        q = mdp.rewards + mdp.gamma * (flat_p @ v).reshape(mdp.shape)
        return q.max(axis=1)

    cap = iteration_cap(mdp.gamma, tol, 2.0 * mdp.r_max)
    v = _fixed_point(bellman_optimality, np.zeros(mdp.num_states), mdp.gamma, tol, cap)
    q = mdp.rewards + mdp.gamma * (flat_p @ v).reshape(mdp.shape)
    greedy = np.argmax(q, axis=1)
    return OptimalSolution(
        v=v, q=q, policy=greedy, j=float(np.dot(mdp.initial_dist, v))
    )


def mismatch_coefficient(mdp: TabularMdp, tol: Optional[float] = None) -> float:
    """max_s d_{ρ,s}(π*) / ρ(s)"""
    rho = mdp.initial_dist
    if np.any(rho <= 0.0):
        s = int(np.argmin(rho))
        raise InvalidMdpError(
            f"mismatch coefficient is undefined: initial_dist[{s}] = {rho[s]}",
            index=(s,),
            value=float(rho[s]),
        )
    solution = optimal_values(mdp, tol)
    probs = np.eye(mdp.num_actions)[solution.policy]
    d_star = state_occupancy(mdp, probs, tol)
    coefficient = float(np.max(d_star / rho))
    logger.debug(f"Mismatch coefficient {coefficient:.6g} under greedy policy {solution.policy}")
    return coefficient


def exact_quantities(
    mdp: TabularMdp,
    policy: BasePolicy,
    horizon: int,
    tol: Optional[float] = None,
    method: Optional[str] = None,
) -> ExactQuantities:
    values = exact_values(mdp, policy, tol, method)
    occupancy = occupancy_measure(mdp, policy, tol, method)
    scores = policy.score_table()
    grad = np.einsum("sa,sad->d", occupancy * values.q, scores) / (1.0 - mdp.gamma)
    return ExactQuantities(
        v=values.v,
        q=values.q,
        advantage=values.advantage,
        occupancy=occupancy,
        j=float(np.dot(mdp.initial_dist, values.v)),
        grad_j=grad,
        grad_j_h=exact_truncated_gradient(mdp, policy, horizon),
        horizon=horizon,
    )
