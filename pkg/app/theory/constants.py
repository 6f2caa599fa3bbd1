"""收敛分析中全部常数的闭式计算。

所有函数都是标量输入的纯函数；报告中的字段名是 `constants` 子命令输出
契约的一部分。
"""
import math
from typing import Any, Dict, Optional

from pydantic import BaseModel, ConfigDict, Field, model_validator

from app.exceptions import ConfigError, PolicyFamilyError
from app.mdp.core import TabularMdp
from app.objectives import ObjectiveSpec
from app.policy.base import BasePolicy, ElsConstants
from app.policy.factory import PolicyFactory
from app.policy.gaussian import GaussianLinearPolicy
from app.schema import EstimatorKind, ObjectiveKind, PolicyFamily


SCHEDULE_RULES: Dict[str, str] = {
    "constant": "eta_t = eta",
    "weak_gd": "b = max{2AL/(mu*delta), 2BL, mu*delta}, t0 = floor(T/2)",
    "pl": "b = max{2AL/mu, 2BL, mu}, t0 = floor(T/2)",
}

REINFORCE_KINDS = (EstimatorKind.REINFORCE, EstimatorKind.BARRIER_REINFORCE)


class Abc(BaseModel):
    """(A, B, C) 二阶矩假设的系数"""

    A: float = Field(0.0, ge=0.0)
    B: float = Field(..., ge=0.0)
    C: float = Field(..., ge=0.0)

    @classmethod
    def for_batch(cls, nu: float, m: int) -> "Abc":
        return cls(A=0.0, B=1.0 - 1.0 / m, C=nu / m)

    @classmethod
    def exact(cls) -> "Abc":
        """精确梯度：‖∇J‖² 即二阶矩"""
        return cls(A=0.0, B=1.0, C=0.0)


class ConstantsSetting(BaseModel):
    """计算常数所需的设定：策略族元数据、目标、MDP 标量、H 与 m"""

    model_config = ConfigDict(populate_by_name=True)

    family: PolicyFamily = PolicyFamily.SOFTMAX_TABULAR
    num_states: int = Field(1, ge=1)
    num_actions: int = Field(2, ge=1)
    feature_bound: float = Field(1.0, gt=0.0)
    sigma: float = Field(1.0, gt=0.0)
    objective: ObjectiveSpec = Field(default_factory=ObjectiveSpec)
    estimator: EstimatorKind = EstimatorKind.GPOMDP
    r_max: float = Field(1.0, gt=0.0)
    gamma: float
    horizon: int = Field(1, ge=1, alias="H")
    m: int = Field(1, ge=1)

    @model_validator(mode="after")
    def _check(self) -> "ConstantsSetting":
        if not (0.0 <= self.gamma < 1.0):
            raise ConfigError(f"gamma must lie in [0, 1), got {self.gamma}", path="/gamma")
        if self.objective.regularized and self.family != PolicyFamily.SOFTMAX_TABULAR:
            raise PolicyFamilyError(
                f"{self.objective.kind.value} constants are only defined for softmax_tabular"
            )
        return self

    @classmethod
    def for_problem(
        cls,
        mdp: TabularMdp,
        policy: BasePolicy,
        objective: Optional[ObjectiveSpec] = None,
        estimator: EstimatorKind = EstimatorKind.GPOMDP,
        horizon: int = 1,
        m: int = 1,
    ) -> "ConstantsSetting":
        """从具体的 MDP 与策略读出设定"""
        metadata: Dict[str, Any] = {"num_states": mdp.num_states}
        if isinstance(policy, GaussianLinearPolicy):
            metadata.update(feature_bound=policy.feature_bound, sigma=policy.sigma)
        else:
            metadata["num_actions"] = mdp.num_actions
        return cls(
            family=policy.family,
            objective=objective or ObjectiveSpec(),
            estimator=estimator,
            r_max=mdp.r_max,
            gamma=mdp.gamma,
            horizon=horizon,
            m=m,
            **metadata,
        )

    @classmethod
    def from_echo(cls, echo: Dict[str, Any]) -> "ConstantsSetting":
        data = dict(echo)
        objective = ObjectiveSpec(
            kind=data.pop("objective", "plain"), lam=data.pop("lambda", 0.0)
        )
        return cls(objective=objective, **data)

    def els(self) -> ElsConstants:
        """由该族的一个原型策略给出 (G², F)"""
        if self.family == PolicyFamily.SOFTMAX_TABULAR:
            prototype = PolicyFactory.zeros(
                self.family, num_states=self.num_states, num_actions=self.num_actions
            )
        else:
            prototype = PolicyFactory.zeros(
                self.family,
                features=[self.feature_bound],
                sigma=self.sigma,
                feature_bound=self.feature_bound,
            )
        return prototype.els_constants()

    def echo(self) -> Dict[str, Any]:
        return {
            "family": self.family.value,
            "num_states": self.num_states,
            "num_actions": self.num_actions,
            "feature_bound": self.feature_bound,
            "sigma": self.sigma,
            **self.objective.to_json_dict(),
            "estimator": self.estimator.value,
            "r_max": self.r_max,
            "gamma": self.gamma,
            "H": self.horizon,
            "m": self.m,
        }


class ConstantsReport(BaseModel):
    g_squared: float
    f: float
    g_squared_ls: Optional[float] = None
    L: float
    Gamma: float
    nu_reinforce: float
    nu_gpomdp: float
    nu: float
    D: float
    D_prime: float
    horizon: int
    m: int
    abc: Abc
    schedule: Dict[str, str] = Field(default_factory=lambda: dict(SCHEDULE_RULES))
    L_barrier: Optional[float] = None
    nu_barrier: Optional[float] = None
    eps_opt: Optional[float] = None
    L_entropy: Optional[float] = None
    nu_entropy: Optional[float] = None
    lam: Optional[float] = None
    setting: Dict[str, Any] = Field(default_factory=dict)

    @property
    def step_window(self) -> Optional[float]:
        """常数步长窗口 (0, 2/(LB)) 的上端；B = 0 时无上界"""
        if self.abc.B == 0.0:
            return None
        return 2.0 / (self.L * self.abc.B)

    def at(
        self, horizon: Optional[int] = None, m: Optional[int] = None
    ) -> "ConstantsReport":
        """在另一组 (H, m) 下重新计算；D、D′ 与 ν_reinforce 随 H 变化"""
        setting = ConstantsSetting.from_echo(self.setting)
        update = {
            "horizon": self.horizon if horizon is None else horizon,
            "m": self.m if m is None else m,
        }
        return compute_constants(setting.model_copy(update=update))

    def to_json_dict(self) -> Dict[str, Any]:
        data = self.model_dump(exclude={"lam"})
        data["lambda"] = self.lam
        return data


def truncation_constants(g: float, r_max: float, gamma: float, horizon: int) -> tuple:
    """(D, D′)，两者都依赖 H"""
    d_prime = (g * r_max / (1.0 - gamma)) * math.sqrt(1.0 / (1.0 - gamma) + horizon)
    return d_prime * g * r_max / (1.0 - gamma) ** 1.5, d_prime


def barrier_smoothness(
    r_max: float, gamma: float, num_states: int, num_actions: int, lam: float
) -> float:
    return r_max * (2.0 - 1.0 / num_actions) / (1.0 - gamma) ** 2 + lam / num_states


def barrier_nu(
    r_max: float,
    gamma: float,
    num_states: int,
    num_actions: int,
    lam: float,
    horizon: int,
    reinforce: bool,
) -> float:
    scale = 2.0 * (1.0 - 1.0 / num_actions)
    if reinforce:
        return scale * (horizon * r_max**2 / (1.0 - gamma) ** 2 + lam**2 / num_states)
    return scale * (r_max**2 / (1.0 - gamma) ** 3 + lam**2 / num_states)


def entropy_smoothness(r_max: float, gamma: float, num_actions: int, lam: float) -> float:
    return (
        r_max * (2.0 - 1.0 / num_actions) / (1.0 - gamma) ** 2
        + lam * (4.0 + 8.0 * math.log(num_actions)) / (1.0 - gamma) ** 3
    )


def entropy_nu(
    r_max: float, gamma: float, num_actions: int, lam: float, horizon: int
) -> float:
    spread = 1.0 - 1.0 / num_actions
    return (
        2.0 * spread * r_max**2 / (1.0 - gamma) ** 3
        + 2.0 * lam**2 * spread / (1.0 - gamma**2)
        + 8.0 * horizon * num_actions * lam**2 / (1.0 - gamma) ** 3
    )


def compute_constants(setting: ConstantsSetting) -> ConstantsReport:
    els = setting.els()
    r_max, gamma, horizon = setting.r_max, setting.gamma, setting.horizon
    g = math.sqrt(els.g_squared)

    smoothness = r_max * (els.g_squared + els.f) / (1.0 - gamma) ** 2
    lipschitz = g * r_max / (1.0 - gamma) ** 1.5
    nu_reinforce = horizon * els.g_squared * r_max**2 / (1.0 - gamma) ** 2
    nu_gpomdp = els.g_squared * r_max**2 / (1.0 - gamma) ** 3
    # 正则目标沿用未正则的截断常数
    d, d_prime = truncation_constants(g, r_max, gamma, horizon)

    extra: Dict[str, Any] = {}
    spec = setting.objective
    if spec.kind == ObjectiveKind.LOG_BARRIER:
        smoothness = barrier_smoothness(
            r_max, gamma, setting.num_states, setting.num_actions, spec.lam
        )
        shape = (setting.num_states, setting.num_actions)
        nu_reinforce = barrier_nu(r_max, gamma, *shape, spec.lam, horizon, reinforce=True)
        nu_gpomdp = barrier_nu(r_max, gamma, *shape, spec.lam, horizon, reinforce=False)
        extra = {
            "L_barrier": smoothness,
            "nu_barrier": nu_reinforce if setting.estimator in REINFORCE_KINDS else nu_gpomdp,
            "eps_opt": spec.lam / (2.0 * setting.num_states * setting.num_actions),
            "lam": spec.lam,
        }
    elif spec.kind == ObjectiveKind.ENTROPY:
        smoothness = entropy_smoothness(r_max, gamma, setting.num_actions, spec.lam)
        nu_reinforce = nu_gpomdp = entropy_nu(
            r_max, gamma, setting.num_actions, spec.lam, horizon
        )
        extra = {"L_entropy": smoothness, "nu_entropy": nu_gpomdp, "lam": spec.lam}

    nu = nu_reinforce if setting.estimator in REINFORCE_KINDS else nu_gpomdp
    return ConstantsReport(
        g_squared=els.g_squared,
        f=els.f,
        g_squared_ls=els.g_squared_ls,
        L=smoothness,
        Gamma=lipschitz,
        nu_reinforce=nu_reinforce,
        nu_gpomdp=nu_gpomdp,
        nu=nu,
        D=d,
        D_prime=d_prime,
        horizon=horizon,
        m=setting.m,
        abc=Abc.for_batch(nu, setting.m),
        setting=setting.echo(),
        **extra,
    )


class IterationBudget(BaseModel):
    T: int
    eta: Optional[float] = None


def iteration_budget(
    constants: ConstantsReport,
    epsilon: float,
    delta0: float,
    abc: Optional[Abc] = None,
) -> IterationBudget:
    """T = ceil(12δ₀L/ε² · max{B, 12δ₀A/ε², 2C/ε²})，并给出对应的 η。

    为零的项不参与 max/min。
    """
    if epsilon <= 0.0:
        raise ValueError(f"epsilon must be positive, got {epsilon}")
    abc = abc or constants.abc
    L = constants.L
    eps2 = epsilon**2

    terms = [abc.B, 12.0 * delta0 * abc.A / eps2, 2.0 * abc.C / eps2]
    terms = [term for term in terms if term > 0.0]
    if delta0 <= 0.0 or not terms:
        T = 0
    else:
        T = math.ceil(12.0 * delta0 * L / eps2 * max(terms))

    candidates = []
    if abc.A > 0.0 and T > 0:
        candidates.append(1.0 / math.sqrt(L * abc.A * T))
    if abc.B > 0.0:
        candidates.append(1.0 / (L * abc.B))
    if abc.C > 0.0:
        candidates.append(epsilon / (2.0 * L * abc.C))
    return IterationBudget(T=T, eta=min(candidates) if candidates else None)
