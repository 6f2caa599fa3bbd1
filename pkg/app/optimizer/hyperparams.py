"""由常数报告推出 (H, m, η, T) 的超参数配方。"""
import math
from typing import Optional

from pydantic import BaseModel

from app.exceptions import ConfigError
from app.logger import logger
from app.mdp.core import TabularMdp
from app.mdp.dp import mismatch_coefficient
from app.objectives import ObjectiveSpec
from app.schema import ObjectiveKind, PolicyFamily
from app.theory.constants import ConstantsReport, ConstantsSetting, compute_constants


class FospHyperparams(BaseModel):
    """达到 ε-FOSP 的一组超参数"""

    epsilon: float
    H: int
    m: int
    m_min: int = 1
    m_max: int
    eta: float
    T: int
    delta0: float
    L: float
    nu: float


class BarrierHyperparams(FospHyperparams):
    lam: float
    eps_opt: float
    delta_prob: float
    mismatch: float


def horizon_for(epsilon: float, gamma: float) -> int:
    """H = ceil(2 log(1/ε) / log(1/γ))；γ = 0 或 ε ≥ 1 时取 1"""
    if gamma == 0.0 or epsilon >= 1.0:
        return 1
    return max(1, math.ceil(2.0 * math.log(1.0 / epsilon) / math.log(1.0 / gamma)))


def _floor(x: float) -> int:
    # 吸收形如 99999.99999999999 的舍入误差
    return math.floor(x * (1.0 + 1e-12))


def default_delta0(constants: ConstantsReport) -> float:
    return 2.0 * constants.setting["r_max"] / (1.0 - constants.setting["gamma"])


def _fosp(
    constants: ConstantsReport,
    epsilon: float,
    m: int,
    delta0: float,
    budget_scale: float = 1.0,
) -> dict:
    if epsilon <= 0.0:
        raise ValueError(f"epsilon must be positive, got {epsilon}")
    L, nu = constants.L, constants.nu
    m_max = max(1, _floor(2.0 * nu / epsilon**2))
    if not (1 <= m <= m_max):
        raise ConfigError(
            f"m = {m} is outside the admissible range [1, {m_max}]", path="/m"
        )
    eta = epsilon**2 * m / (2.0 * L * nu)
    T = math.ceil(budget_scale * 8.0 * delta0 * L * nu / (m * epsilon**4))
    return {"m": m, "m_max": m_max, "eta": eta, "T": T, "L": L, "nu": nu}


def hyperparams_for_fosp(
    constants: ConstantsReport,
    epsilon: float,
    m: int = 1,
    delta0: Optional[float] = None,
    horizon: Optional[int] = None,
) -> FospHyperparams:
    """H 缺省时由 ε 与 γ 决定，给定时沿用（ν 可能依赖 H）；常数在该 H 下重新计算后
    给出 m 范围、η = ε²m/(2Lν) 与 T = ceil(8δ₀Lν/(mε⁴))。δ₀ 缺省时取上界 2r_max/(1−γ)。
    """
    if epsilon <= 0.0:
        raise ValueError(f"epsilon must be positive, got {epsilon}")
    if horizon is None:
        H = horizon_for(epsilon, constants.setting["gamma"])
    else:
        H = horizon
    at_h = constants.at(horizon=H, m=m)
    delta0 = default_delta0(constants) if delta0 is None else delta0
    recipe = _fosp(at_h, epsilon, m, delta0)
    return FospHyperparams(epsilon=epsilon, H=H, delta0=delta0, **recipe)


def hyperparams_for_global_barrier(
    constants: ConstantsReport,
    mdp: TabularMdp,
    epsilon: float,
    delta_prob: float,
    m: int = 1,
    delta0: Optional[float] = None,
) -> BarrierHyperparams:
    """对数障碍的全局最优配方。

    λ = (1−γ)ε/(2·mismatch)，ε_opt = λ/(2|S||A|)；其余参数按 L_λ 的 FOSP 配方以
    ε_opt 为精度给出，且概率版本要求 Tm ≥ 8δ₀Lν/(δ²ε_opt⁴)。
    """
    if not (0.0 < delta_prob <= 1.0):
        raise ValueError(f"delta_prob must lie in (0, 1], got {delta_prob}")
    mismatch = mismatch_coefficient(mdp)
    lam = (1.0 - mdp.gamma) * epsilon / (2.0 * mismatch)
    eps_opt = lam / (2.0 * mdp.num_states * mdp.num_actions)

    setting = ConstantsSetting.from_echo(constants.setting).model_copy(
        update={
            "family": PolicyFamily.SOFTMAX_TABULAR,
            "objective": ObjectiveSpec(kind=ObjectiveKind.LOG_BARRIER, lam=lam),
            "num_states": mdp.num_states,
            "num_actions": mdp.num_actions,
            "r_max": mdp.r_max,
            "gamma": mdp.gamma,
            "horizon": horizon_for(eps_opt, mdp.gamma),
            "m": m,
        }
    )
    barrier = compute_constants(setting)
    delta0 = default_delta0(barrier) if delta0 is None else delta0
    recipe = _fosp(barrier, eps_opt, m, delta0, budget_scale=1.0 / delta_prob**2)
    logger.debug(
        f"Barrier recipe: mismatch={mismatch:.4g}, lambda={lam:.4g}, "
        f"eps_opt={eps_opt:.4g}, T={recipe['T']}"
    )
    return BarrierHyperparams(
        epsilon=epsilon,
        H=setting.horizon,
        delta0=delta0,
        lam=lam,
        eps_opt=eps_opt,
        delta_prob=delta_prob,
        mismatch=mismatch,
        **recipe,
    )
