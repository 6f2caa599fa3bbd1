"""实验与扫描配置：JSON 文档的校验、"auto" 字段的解析与完整回显。"""
import json
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional, Tuple, Union

from pydantic import (
    BaseModel,
    ConfigDict,
    Field,
    PositiveFloat,
    PositiveInt,
    ValidationError,
    model_validator,
)

from app.estimator.base import EstimatorConfig
from app.exceptions import ConfigError
from app.logger import logger
from app.mdp.benchmarks import BENCHMARKS, load_benchmark
from app.mdp.core import TabularMdp, load_mdp
from app.mdp.dp import optimal_values
from app.objectives import ObjectiveSpec
from app.optimizer.hyperparams import FospHyperparams, horizon_for, hyperparams_for_fosp
from app.optimizer.schedule import StepSchedule
from app.policy.base import BasePolicy
from app.policy.factory import PolicyFactory
from app.schema import EstimatorKind, PolicyFamily, ScheduleKind, SweepAxis
from app.theory.constants import ConstantsReport, ConstantsSetting, compute_constants


Auto = Literal["auto"]
AUTO = "auto"

# pydantic 在联合类型的 loc 中插入的成员标签
_UNION_TAGS = {"int", "float", "str", "bool", "dict", "list", "none"}


def json_pointer(loc: Tuple[Any, ...]) -> str:
    parts = [
        str(item)
        for item in loc
        if isinstance(item, int)
        or not (item in _UNION_TAGS or "[" in item or "-" in item)
    ]
    return "/" + "/".join(parts) if parts else ""


def config_error(error: ValidationError, prefix: str = "") -> ConfigError:
    """取第一条 pydantic 错误，转换为带 JSON pointer 的 ConfigError"""
    first = error.errors()[0]
    return ConfigError(first["msg"], path=prefix + json_pointer(tuple(first["loc"])))


def read_document(path: Union[str, Path]) -> Dict[str, Any]:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise ConfigError(f"config file {path} is not valid JSON: {e}") from e
    if not isinstance(data, dict):
        raise ConfigError("config document must be a JSON object")
    return data


class PolicyInit(BaseModel):
    """初始策略：zeros 或 θ ~ U(−scale, scale)^d"""

    model_config = ConfigDict(extra="forbid")

    family: PolicyFamily = PolicyFamily.SOFTMAX_TABULAR
    init: Literal["zeros", "uniform_random"] = "zeros"
    scale: float = Field(1.0, ge=0.0)
    seed: int = 0

    def build(self, mdp: TabularMdp) -> BasePolicy:
        if self.family != PolicyFamily.SOFTMAX_TABULAR:
            raise ConfigError(
                "runs on tabular MDPs need the softmax_tabular family",
                path="/policy/family",
            )
        shape = {"num_states": mdp.num_states, "num_actions": mdp.num_actions}
        if self.init == "zeros":
            return PolicyFactory.zeros(self.family, **shape)
        return PolicyFactory.uniform_random(
            self.family, scale=self.scale, seed=self.seed, **shape
        )


class ScheduleSpec(BaseModel):
    """StepSchedule 的配置形式；eta 可以写成 auto"""

    model_config = ConfigDict(extra="forbid")

    kind: ScheduleKind = ScheduleKind.CONSTANT
    eta: Union[PositiveFloat, Auto, None] = None
    mu: Optional[PositiveFloat] = None
    delta: Optional[PositiveFloat] = None


class ExperimentConfig(BaseModel):
    """一次实验的完整配置。

    m、H、T 与 schedule.eta 可以写成 "auto"，此时必须给出 epsilon，由 FOSP
    配方解析；解析后的回显不再含有 "auto"。
    """

    model_config = ConfigDict(extra="forbid", populate_by_name=True)

    mdp: Union[str, Dict[str, Any]] = "random3"
    policy: PolicyInit = Field(default_factory=PolicyInit)
    objective: ObjectiveSpec = Field(default_factory=ObjectiveSpec)
    estimator: EstimatorKind = EstimatorKind.GPOMDP
    m: Union[PositiveInt, Auto] = 1
    H: Union[PositiveInt, Auto] = 20
    T: Union[int, Auto] = 100
    schedule: ScheduleSpec = Field(default_factory=lambda: ScheduleSpec(eta=AUTO))
    epsilon: Optional[PositiveFloat] = None
    exact_mode: bool = False
    seeds: List[int] = Field(default_factory=lambda: [0], min_length=1)
    output_dir: Optional[str] = None

    @model_validator(mode="after")
    def _check(self) -> "ExperimentConfig":
        if self.auto_fields() and self.epsilon is None:
            raise ConfigError(
                f"'auto' fields {', '.join(self.auto_fields())} require epsilon",
                path="/epsilon",
            )
        if isinstance(self.T, int) and self.T < 0:
            raise ConfigError(f"T must be nonnegative, got {self.T}", path="/T")
        return self

    def auto_fields(self) -> List[str]:
        fields = [name for name in ("m", "H", "T") if getattr(self, name) == AUTO]
        if self.schedule.eta == AUTO:
            fields.append("schedule/eta")
        return fields

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "ExperimentConfig":
        try:
            return cls.model_validate(data)
        except ValidationError as e:
            raise config_error(e) from e

    @classmethod
    def load(cls, path: Union[str, Path]) -> "ExperimentConfig":
        return cls.from_dict(read_document(path))

    def echo(self) -> Dict[str, Any]:
        return {
            "mdp": self.mdp,
            "policy": self.policy.model_dump(mode="json"),
            "objective": self.objective.to_json_dict(),
            "estimator": self.estimator.value,
            "m": self.m,
            "H": self.H,
            "T": self.T,
            "schedule": self.schedule.model_dump(mode="json", exclude_none=True),
            "epsilon": self.epsilon,
            "exact_mode": self.exact_mode,
            "seeds": list(self.seeds),
            "output_dir": self.output_dir,
        }


class ResolvedExperiment(BaseModel):
    """解析完成、可以直接交给 run_pg 的实验"""

    config: ExperimentConfig
    mdp: TabularMdp
    policy: BasePolicy
    estimator: EstimatorConfig
    schedule: StepSchedule
    constants: ConstantsReport
    recipe: Optional[FospHyperparams] = None
    j_star: float

    class Config:
        arbitrary_types_allowed = True

    @property
    def T(self) -> int:
        return int(self.config.T)


def load_experiment_mdp(
    source: Union[str, Dict[str, Any]], base_dir: Optional[Path] = None
) -> TabularMdp:
    """内联文档、内置基准名或 JSON 文件路径"""
    if isinstance(source, dict):
        return TabularMdp.from_dict(source)
    if source in BENCHMARKS:
        return load_benchmark(source)
    path = Path(source)
    if not path.is_absolute() and base_dir is not None and not path.exists():
        path = base_dir / path
    return load_mdp(path)


def resolve(
    config: ExperimentConfig, base_dir: Optional[Path] = None
) -> ResolvedExperiment:
    mdp = load_experiment_mdp(config.mdp, base_dir)
    policy = config.policy.build(mdp)
    objective = config.objective

    estimator_objective = EstimatorConfig(kind=config.estimator, horizon=1).objective
    if not config.exact_mode and estimator_objective.kind != objective.kind:
        raise ConfigError(
            f"estimator {config.estimator.value} targets the "
            f"{estimator_objective.kind.value} objective, not {objective.kind.value}",
            path="/estimator",
        )

    m = 1 if config.m == AUTO else config.m
    if config.H == AUTO:
        horizon = horizon_for(config.epsilon, mdp.gamma)
    else:
        horizon = config.H
    setting = ConstantsSetting.for_problem(
        mdp, policy, objective, config.estimator, horizon, m
    )
    constants = compute_constants(setting)

    recipe = None
    if config.auto_fields():
        recipe = hyperparams_for_fosp(constants, config.epsilon, m=m, horizon=horizon)
        logger.info(
            f"Resolved 'auto' fields at epsilon={config.epsilon}: "
            f"H={recipe.H}, m={recipe.m}, eta={recipe.eta:.4g}, T={recipe.T}"
        )
    H = horizon
    T = recipe.T if config.T == AUTO else config.T
    eta = recipe.eta if config.schedule.eta == AUTO else config.schedule.eta

    schedule = StepSchedule(
        kind=config.schedule.kind,
        eta=eta,
        mu=config.schedule.mu,
        delta=config.schedule.delta,
    ).bind(constants.abc, constants.L, T)

    materialized = config.model_copy(
        update={
            "m": m,
            "H": H,
            "T": T,
            "schedule": config.schedule.model_copy(update={"eta": eta}),
        }
    )
    return ResolvedExperiment(
        config=materialized,
        mdp=mdp,
        policy=policy,
        estimator=EstimatorConfig(
            kind=config.estimator, m=m, horizon=H, lam=objective.lam
        ),
        schedule=schedule,
        constants=constants,
        recipe=recipe,
        j_star=optimal_values(mdp).j,
    )


class SweepSpec(BaseModel):
    """在一个坐标轴上扫描基础配置；每个取值运行 seeds 中的全部种子"""

    model_config = ConfigDict(extra="forbid")

    base: ExperimentConfig
    axis: SweepAxis
    values: List[float] = Field(..., min_length=1)
    seeds: Optional[List[int]] = Field(None, min_length=1)

    @classmethod
    def from_dict(cls, data: Dict[str, Any], base_dir: Optional[Path] = None) -> "SweepSpec":
        data = dict(data)
        if isinstance(data.get("base"), str):
            path = Path(data["base"])
            if not path.is_absolute() and base_dir is not None:
                path = base_dir / path
            data["base"] = read_document(path)
        try:
            return cls.model_validate(data)
        except ValidationError as e:
            raise config_error(e) from e

    @classmethod
    def load(cls, path: Union[str, Path]) -> "SweepSpec":
        path = Path(path)
        return cls.from_dict(read_document(path), base_dir=path.parent)

    @property
    def point_seeds(self) -> List[int]:
        return list(self.seeds) if self.seeds else list(self.base.seeds)

    def point(self, index: int) -> ExperimentConfig:
        """第 index 个取值对应的配置"""
        value = self.values[index]
        base = self.base
        if self.axis == SweepAxis.M:
            update = {"m": int(value)}
        elif self.axis == SweepAxis.H:
            update = {"H": int(value)}
        elif self.axis == SweepAxis.ETA:
            update = {"schedule": base.schedule.model_copy(update={"eta": value})}
        elif self.axis == SweepAxis.EPSILON:
            update = {"epsilon": value}
        else:
            if not base.objective.regularized:
                raise ConfigError(
                    "a lambda sweep needs a regularized objective", path="/axis"
                )
            update = {"objective": base.objective.model_copy(update={"lam": value})}
        return base.model_copy(update=update)

    def resolve_points(self, base_dir: Optional[Path] = None) -> List[ResolvedExperiment]:
        """解析全部取值；越界取值报告为 /values/<i>"""
        points = []
        for i in range(len(self.values)):
            try:
                point = ExperimentConfig.from_dict(self.point(i).echo())
                points.append(resolve(point, base_dir))
            except ConfigError as e:
                raise ConfigError(e.message, path=f"/values/{i}") from e
        return points
