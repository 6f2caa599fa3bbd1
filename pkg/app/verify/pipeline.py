"""对数障碍 softmax 的端到端流程：先到 ε_opt-驻点，再断言全局最优间隙 ≤ ε。"""
import math
from concurrent.futures import ThreadPoolExecutor
from typing import List, Literal, Optional

from pydantic import BaseModel, Field

from app.config import config
from app.estimator.base import EstimatorConfig
from app.logger import logger
from app.mdp.core import TabularMdp
from app.mdp.dp import exact_return, optimal_values
from app.objectives import ObjectiveSpec
from app.optimizer.hyperparams import BarrierHyperparams, hyperparams_for_global_barrier
from app.optimizer.runner import AscentResult, ascend_until
from app.policy.factory import PolicyFactory
from app.schema import CheckStatus, EstimatorKind, ObjectiveKind, PolicyFamily
from app.theory.constants import ConstantsSetting, compute_constants
from app.utils.seeding import split_seed
from app.verify.report import CheckReport


class PipelineBudget(BaseModel):
    """桌面规模的预算；eta 缺省为 1/L_λ"""

    max_iterations: int = Field(
        default_factory=lambda: config.verify.pipeline_iterations, ge=1
    )
    stochastic_iterations: int = Field(
        default_factory=lambda: config.verify.pipeline_stochastic_iterations, ge=1
    )
    m: int = Field(default_factory=lambda: config.verify.pipeline_m, ge=1)
    eta: Optional[float] = Field(None, gt=0.0)
    n_seeds: Optional[int] = Field(None, ge=1)


def binomial_margin(n: int) -> float:
    """95% 二项余量的保守形式 1/√n（n = 20 时为 0.2236）"""
    return 1.0 / math.sqrt(n)


def _recipe(mdp: TabularMdp, epsilon: float, delta_prob: float, m: int) -> BarrierHyperparams:
    setting = ConstantsSetting(
        num_states=mdp.num_states,
        num_actions=mdp.num_actions,
        estimator=EstimatorKind.BARRIER_GPOMDP,
        r_max=mdp.r_max,
        gamma=mdp.gamma,
        m=m,
    )
    return hyperparams_for_global_barrier(
        compute_constants(setting), mdp, epsilon, delta_prob, m=m
    )


def _final_gap(mdp: TabularMdp, result: AscentResult, j_star: float) -> float:
    return j_star - exact_return(mdp, result.policy)


def check_global_barrier_pipeline(
    mdp: TabularMdp,
    epsilon: float,
    mode: Literal["exact", "stochastic"] = "exact",
    budget: Optional[PipelineBudget] = None,
    base_seed: int = 0,
    delta_prob: float = 0.3,
    jobs: Optional[int] = None,
) -> CheckReport:
    budget = budget or PipelineBudget()
    m = budget.m if mode == "stochastic" else 1
    recipe = _recipe(mdp, epsilon, delta_prob if mode == "stochastic" else 1.0, m)
    spec = ObjectiveSpec(kind=ObjectiveKind.LOG_BARRIER, lam=recipe.lam)
    eta = budget.eta or 1.0 / recipe.L
    j_star = optimal_values(mdp).j
    start = PolicyFactory.zeros(
        PolicyFamily.SOFTMAX_TABULAR,
        num_states=mdp.num_states,
        num_actions=mdp.num_actions,
    )
    # λ 的取法使 2λ·mismatch/(1−γ) 恰为 ε
    gap_bound = 2.0 * recipe.lam * recipe.mismatch / (1.0 - mdp.gamma)
    common = {
        "mode": mode,
        "epsilon": epsilon,
        "lambda": recipe.lam,
        "eps_opt": recipe.eps_opt,
        "mismatch": recipe.mismatch,
        "eta": eta,
        "j_star": j_star,
        "theory_T": recipe.T,
        "H": recipe.H,
    }
    logger.info(
        f"🔎 Barrier pipeline ({mode}): lambda={recipe.lam:.4g}, "
        f"eps_opt={recipe.eps_opt:.4g}, eta={eta:.4g}"
    )

    if mode == "exact":
        result = ascend_until(
            mdp, start, spec, recipe.eps_opt, eta, budget.max_iterations
        )
        gap = _final_gap(mdp, result, j_star)
        details = {
            **common,
            "iterations": result.iterations,
            "objective_grad_norm": result.objective_grad_norm,
        }
        if not result.converged:
            return CheckReport.inconclusive(
                "global_barrier_exact",
                "budget exhausted before the gradient threshold was reached",
                gap=gap,
                **details,
            )
        return CheckReport.inequality("global_barrier_exact", gap, gap_bound, **details)

    n_seeds = budget.n_seeds or config.verify.n_seeds
    estimator = EstimatorConfig(
        kind=EstimatorKind.BARRIER_GPOMDP, m=m, horizon=recipe.H, lam=recipe.lam
    )

    def run_seed(k: int) -> AscentResult:
        return ascend_until(
            mdp,
            start,
            spec,
            recipe.eps_opt,
            eta,
            budget.stochastic_iterations,
            estimator=estimator,
            base_seed=split_seed(base_seed, k),
        )

    jobs = config.sampling.jobs if jobs is None else jobs
    if jobs <= 1:
        results: List[AscentResult] = [run_seed(k) for k in range(n_seeds)]
    else:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(run_seed, range(n_seeds)))

    gaps = [_final_gap(mdp, result, j_star) for result in results]
    exceeded = [k for k, gap in enumerate(gaps) if gap > gap_bound]
    fraction = len(exceeded) / n_seeds
    margin = binomial_margin(n_seeds)
    details = {
        **common,
        "n_seeds": n_seeds,
        "m": m,
        "gaps": gaps,
        "converged": [result.converged for result in results],
        "exceeding_seeds": [split_seed(base_seed, k) for k in exceeded],
        "base_seed": base_seed,
    }
    report = CheckReport.inequality(
        "global_barrier_stochastic", fraction, delta_prob, margin, **details
    )
    if report.failed and not all(result.converged for result in results):
        report = report.replace(
            status=CheckStatus.INCONCLUSIVE,
            details={**details, "reason": "some seeds never reached the gradient threshold"},
        )
    return report
