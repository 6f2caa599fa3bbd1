"""香草策略梯度上升循环。

每一轮都用 DP 预言机记录 J(θ_t)、‖∇J(θ_t)‖² 与 ‖∇J_H(θ_t)‖²；这些量只用于
记录，不提供给优化器（exact_mode 除外，此时更新方向就是精确目标梯度）。
"""
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, Field

from app.estimator.base import EstimatorConfig
from app.estimator.estimators import estimate_with
from app.exceptions import NonFiniteIterateError
from app.logger import logger
from app.mdp.core import TabularMdp
from app.mdp.dp import exact_quantities, optimal_values
from app.mdp.sampling import sample_batch
from app.objectives import (
    ObjectiveSpec,
    barrier_gradient_term,
    barrier_value_term,
    exact_objective_gradient,
    objective_value,
    require_softmax,
)
from app.optimizer.schedule import StepSchedule, step_size
from app.policy.base import BasePolicy
from app.schema import ObjectiveKind


ROW_COLUMNS = (
    "t",
    "eta",
    "j",
    "grad_norm_sq",
    "grad_h_norm_sq",
    "objective",
    "objective_grad_norm_sq",
    "trajectories",
    "env_steps",
)


class RunRow(BaseModel):
    t: int
    eta: float
    j: float
    grad_norm_sq: float
    grad_h_norm_sq: float
    objective: float
    objective_grad_norm_sq: float
    trajectories: int
    env_steps: int

    def to_json_dict(self) -> Dict[str, Any]:
        return {column: getattr(self, column) for column in ROW_COLUMNS}


class RunRecord(BaseModel):
    """一次运行的逐轮记录、终点参数与配置回显"""

    rows: List[RunRow] = Field(default_factory=list)
    final_theta: np.ndarray
    final_j: float
    final_objective: float
    final_grad_norm_sq: float
    j_star: float
    base_seed: int
    config: Dict[str, Any] = Field(default_factory=dict)
    diverged_at: Optional[int] = None

    class Config:
        arbitrary_types_allowed = True

    @property
    def T(self) -> int:
        return len(self.rows)

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(row, name) for row in self.rows])

    def min_grad_norm_sq(self) -> Tuple[int, float]:
        """min_t ‖∇J(θ_t)‖²；并列取最早的 t"""
        values = self.column("grad_norm_sq")
        t = int(np.argmin(values))
        return t, float(values[t])

    def summary(self) -> Dict[str, Any]:
        gaps = self.j_star - self.column("j")
        cumulative_regret = float(np.sum(gaps))
        best_t, best = self.min_grad_norm_sq() if self.rows else (None, None)
        last = self.rows[-1] if self.rows else None
        return {
            "T": self.T,
            "final_theta": [float(x) for x in self.final_theta],
            "final_j": self.final_j,
            "final_objective": self.final_objective,
            "final_grad_norm_sq": self.final_grad_norm_sq,
            "j_star": self.j_star,
            "gap": self.j_star - self.final_j,
            "last_row_gap": self.j_star - last.j if last else None,
            "min_grad_norm_sq": best,
            "min_grad_norm_sq_t": best_t,
            "mean_grad_norm_sq": float(np.mean(self.column("grad_norm_sq")))
            if self.rows
            else None,
            "cumulative_regret": cumulative_regret,
            "average_regret": cumulative_regret / self.T if self.rows else None,
            "trajectories": last.trajectories if last else 0,
            "env_steps": last.env_steps if last else 0,
            "base_seed": self.base_seed,
            "diverged_at": self.diverged_at,
            "config": self.config,
        }


class Instrumentation(BaseModel):
    """θ 处的精确量：J、∇J、∇J_H 以及所配置目标的值与梯度"""

    j: float
    grad: np.ndarray
    grad_h: np.ndarray
    objective: float
    objective_grad: np.ndarray

    class Config:
        arbitrary_types_allowed = True


def instrument(
    mdp: TabularMdp, policy: BasePolicy, spec: ObjectiveSpec, horizon: int
) -> Instrumentation:
    exact = exact_quantities(mdp, policy, horizon)
    if spec.kind == ObjectiveKind.PLAIN:
        value, grad = exact.j, exact.grad_j
    elif spec.kind == ObjectiveKind.LOG_BARRIER:
        policy = require_softmax(policy, "log-barrier objective")
        value = exact.j + barrier_value_term(policy, spec.lam)
        grad = exact.grad_j + barrier_gradient_term(policy, spec.lam)
    else:
        value = objective_value(spec, mdp, policy)
        grad = exact_objective_gradient(spec, mdp, policy)
    return Instrumentation(
        j=exact.j,
        grad=exact.grad_j,
        grad_h=exact.grad_j_h,
        objective=value,
        objective_grad=grad,
    )


def _check_finite(vector: np.ndarray, what: str, t: int) -> None:
    if not np.all(np.isfinite(vector)):
        raise NonFiniteIterateError(f"non-finite {what} at iteration {t}", iteration=t)


def _direction(
    mdp: TabularMdp,
    policy: BasePolicy,
    estimator: EstimatorConfig,
    exact: Instrumentation,
    exact_mode: bool,
    base_seed: int,
    t: int,
    jobs: Optional[int],
) -> np.ndarray:
    if exact_mode:
        return exact.objective_grad
    batch = sample_batch(
        mdp, policy, estimator.horizon, estimator.m, base_seed, prefix=(t,), jobs=jobs
    )
    return estimate_with(estimator, batch, policy, mdp.gamma).grad


def run_pg(
    mdp: TabularMdp,
    policy_init: BasePolicy,
    objective: ObjectiveSpec,
    estimator: EstimatorConfig,
    schedule: StepSchedule,
    T: int,
    base_seed: int,
    exact_mode: bool = False,
    jobs: Optional[int] = None,
    j_star: Optional[float] = None,
    config_echo: Optional[Dict[str, Any]] = None,
) -> RunRecord:
    """θ_{t+1} = θ_t + η_t ĝ_t，t = 0..T−1。

    第 t 轮的第 i 条轨迹种子为 split(base_seed, t, i)。
    """
    if j_star is None:
        j_star = optimal_values(mdp).j
    mode = "exact" if exact_mode else f"{estimator.kind.value} m={estimator.m}"
    logger.info(
        f"🚀 Running vanilla PG ({mode}, H={estimator.horizon}, T={T}, "
        f"objective={objective.kind.value}) with seed {base_seed}"
    )

    policy = policy_init
    rows: List[RunRow] = []
    trajectories = env_steps = 0
    report_every = max(1, T // 10)
    for t in range(T):
        exact = instrument(mdp, policy, objective, estimator.horizon)
        eta = step_size(schedule, t)
        direction = _direction(
            mdp, policy, estimator, exact, exact_mode, base_seed, t, jobs
        )
        if not exact_mode:
            trajectories += estimator.m
            env_steps += estimator.m * estimator.horizon
        rows.append(
            RunRow(
                t=t,
                eta=eta,
                j=exact.j,
                grad_norm_sq=float(np.dot(exact.grad, exact.grad)),
                grad_h_norm_sq=float(np.dot(exact.grad_h, exact.grad_h)),
                objective=exact.objective,
                objective_grad_norm_sq=float(
                    np.dot(exact.objective_grad, exact.objective_grad)
                ),
                trajectories=trajectories,
                env_steps=env_steps,
            )
        )

        try:
            _check_finite(direction, "gradient", t)
            theta = policy.theta + eta * direction
            _check_finite(theta, "parameters", t)
        except NonFiniteIterateError as e:
            # 最后一行对应的 θ_t 仍然有限，作为终点写入部分记录
            last = rows[-1]
            e.record = RunRecord(
                rows=rows,
                final_theta=np.array(policy.theta),
                final_j=last.j,
                final_objective=last.objective,
                final_grad_norm_sq=last.grad_norm_sq,
                j_star=j_star,
                base_seed=base_seed,
                config=config_echo or {},
                diverged_at=t,
            )
            logger.error(f"💥 Run with seed {base_seed} diverged at iteration {t}: {e.message}")
            raise
        policy = policy.with_theta(theta)

        if (t + 1) % report_every == 0:
            logger.info(
                f"t={t + 1}/{T}: J={rows[-1].j:.6f}, gap={j_star - rows[-1].j:.3e}, "
                f"|grad J|^2={rows[-1].grad_norm_sq:.3e}"
            )

    final = instrument(mdp, policy, objective, estimator.horizon)
    record = RunRecord(
        rows=rows,
        final_theta=np.array(policy.theta),
        final_j=final.j,
        final_objective=final.objective,
        final_grad_norm_sq=float(np.dot(final.grad, final.grad)),
        j_star=j_star,
        base_seed=base_seed,
        config=config_echo or {},
    )
    logger.info(f"🏁 Run finished: J={final.j:.6f}, gap to J*={j_star - final.j:.3e}")
    return record


class AscentResult(BaseModel):
    policy: BasePolicy
    iterations: int
    converged: bool
    objective_grad_norm: float
    trajectories: int = 0

    class Config:
        arbitrary_types_allowed = True


def ascend_until(
    mdp: TabularMdp,
    policy_init: BasePolicy,
    objective: ObjectiveSpec,
    threshold: float,
    eta: float,
    max_iterations: int,
    estimator: Optional[EstimatorConfig] = None,
    base_seed: int = 0,
    jobs: Optional[int] = None,
) -> AscentResult:
    """上升直到精确的 ‖∇目标‖ ≤ threshold 或用完预算。

    estimator 为 None 时使用精确梯度，否则用采样估计；停止判据始终由 DP 监控。
    """
    policy = policy_init
    trajectories = 0
    for t in range(max_iterations + 1):
        grad = exact_objective_gradient(objective, mdp, policy)
        norm = float(np.linalg.norm(grad))
        if norm <= threshold:
            return AscentResult(
                policy=policy,
                iterations=t,
                converged=True,
                objective_grad_norm=norm,
                trajectories=trajectories,
            )
        if t == max_iterations:
            break
        if estimator is None:
            direction = grad
        else:
            batch = sample_batch(
                mdp,
                policy,
                estimator.horizon,
                estimator.m,
                base_seed,
                prefix=(t,),
                jobs=jobs,
            )
            direction = estimate_with(estimator, batch, policy, mdp.gamma).grad
            trajectories += estimator.m
        _check_finite(direction, "gradient", t)
        policy = policy.with_theta(policy.theta + eta * direction)

    logger.warning(
        f"Ascent stopped after {max_iterations} iterations with "
        f"|grad|={norm:.3e} > {threshold:.3e}"
    )
    return AscentResult(
        policy=policy,
        iterations=max_iterations,
        converged=False,
        objective_grad_norm=norm,
        trajectories=trajectories,
    )
