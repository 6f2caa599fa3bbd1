"""检查套件：每项检查是一个 BaseCheck，CheckCollection 负责按名执行与事件记录。"""
import threading
import zlib
from abc import ABC, abstractmethod
from concurrent.futures import ThreadPoolExecutor
from typing import Dict, Iterable, List, Optional

import numpy as np
from pydantic import BaseModel, Field, PrivateAttr

from app.config import config
from app.estimator.base import EstimatorConfig
from app.estimator.estimators import Kernel
from app.exceptions import ConfigError
from app.logger import logger
from app.mdp.benchmarks import (
    REFERENCE_GAMMA,
    benchmark_names,
    enumeration_mdp,
    load_benchmark,
    random_mdp,
    reference_mdp,
)
from app.mdp.core import TabularMdp
from app.objectives import ObjectiveSpec
from app.optimizer.hyperparams import hyperparams_for_fosp
from app.optimizer.runner import RunRecord, run_pg
from app.optimizer.schedule import StepSchedule
from app.policy.base import BasePolicy
from app.policy.factory import PolicyFactory
from app.schema import EstimatorKind, PolicyFamily
from app.theory.constants import ConstantsReport, ConstantsSetting, compute_constants
from app.utils.logger import check_events
from app.utils.logger import logger as event_logger
from app.utils.seeding import split_seed
from app.verify import checks
from app.verify.mutations import Mutation
from app.verify.pipeline import PipelineBudget, check_global_barrier_pipeline
from app.verify.report import CheckReport


REGULARIZED_LAMBDA = 0.5
SMOOTHNESS_MDPS = 4


class VerifyContext(BaseModel):
    """一次 verify 调用的共享输入"""

    mdp: TabularMdp = Field(default_factory=lambda: load_benchmark("random3"))
    enumeration_mdp: TabularMdp = Field(default_factory=enumeration_mdp)
    reference_mdp: TabularMdp = Field(default_factory=reference_mdp)
    user_mdp: bool = False
    base_seed: int = 0
    jobs: int = Field(default_factory=lambda: config.sampling.jobs, ge=1)
    horizon: Optional[int] = Field(None, ge=1)
    mutation: Optional[Mutation] = None

    _exact_run: Optional[RunRecord] = PrivateAttr(default=None)
    _lock: threading.Lock = PrivateAttr(default_factory=threading.Lock)

    class Config:
        arbitrary_types_allowed = True

    @classmethod
    def for_mdp(cls, mdp: TabularMdp, **kwargs) -> "VerifyContext":
        """用户给定的 MDP 同时用于枚举类与常数类检查"""
        return cls(
            mdp=mdp, enumeration_mdp=mdp, reference_mdp=mdp, user_mdp=True, **kwargs
        )

    def seed_for(self, check_name: str) -> int:
        return split_seed(self.base_seed, zlib.crc32(check_name.encode()))

    def kernel_for(self, check_name: str, kind: EstimatorKind) -> Optional[Kernel]:
        mutation = self.mutation
        if mutation and mutation.target_check == check_name and mutation.kind == kind:
            return mutation.kernel
        return None

    def random_softmax(self, mdp: TabularMdp, check_name: str) -> BasePolicy:
        return PolicyFactory.uniform_random(
            PolicyFamily.SOFTMAX_TABULAR,
            scale=config.verify.theta_scale,
            seed=self.seed_for(check_name),
            num_states=mdp.num_states,
            num_actions=mdp.num_actions,
        )

    def softmax_zeros(self, mdp: TabularMdp) -> BasePolicy:
        return PolicyFactory.zeros(
            PolicyFamily.SOFTMAX_TABULAR,
            num_states=mdp.num_states,
            num_actions=mdp.num_actions,
        )

    def plain_constants(self, horizon: int, m: int = 1) -> ConstantsReport:
        setting = ConstantsSetting.for_problem(
            self.mdp, self.softmax_zeros(self.mdp), None, EstimatorKind.GPOMDP, horizon, m
        )
        return compute_constants(setting)

    def exact_run(self) -> RunRecord:
        """η = 1/L 的精确 PG 运行，由弱梯度支配与定理界检查共享"""
        with self._lock:
            if self._exact_run is None:
                horizon = max(config.verify.horizons)
                constants = self.plain_constants(horizon)
                self._exact_run = run_pg(
                    self.mdp,
                    self.softmax_zeros(self.mdp),
                    ObjectiveSpec(),
                    EstimatorConfig(kind=EstimatorKind.GPOMDP, horizon=horizon),
                    StepSchedule(eta=1.0 / constants.L),
                    T=config.verify.run_T,
                    base_seed=self.base_seed,
                    exact_mode=True,
                )
            return self._exact_run


class BaseCheck(ABC, BaseModel):
    """所有检查的基类。

    属性:
        name (str): 检查名称，也是 CLI 中的名字
        description (str): 检查内容的简述
    """

    name: str
    description: str

    class Config:
        arbitrary_types_allowed = True

    def __call__(self, context: VerifyContext) -> CheckReport:
        return self.execute(context)

    @abstractmethod
    def execute(self, context: VerifyContext) -> CheckReport:
        """在给定上下文上执行检查"""


class UnbiasednessCheck(BaseCheck):
    name: str = "unbiasedness"
    description: str = "Exact expectation of every estimator equals the truncated gradient"

    def execute(self, context: VerifyContext) -> CheckReport:
        mdp = context.enumeration_mdp
        horizon = context.horizon or 3
        policy = context.random_softmax(mdp, self.name)
        parts = {}
        for kind in EstimatorKind:
            regularized = EstimatorConfig(kind=kind, horizon=horizon).objective.regularized
            lam = REGULARIZED_LAMBDA if regularized else 0.0
            parts[kind.value] = checks.check_unbiasedness(
                mdp, policy, kind, horizon, lam, kernel=context.kernel_for(self.name, kind)
            )
        return CheckReport.combine(self.name, parts, H=horizon)


class PgtEquivalenceCheck(BaseCheck):
    name: str = "pgt_equivalence"
    description: str = "PGT and GPOMDP agree per trajectory"

    def execute(self, context: VerifyContext) -> CheckReport:
        policy = context.random_softmax(context.mdp, self.name)
        return checks.check_pgt_equivalence(
            context.mdp,
            policy,
            context.horizon or 20,
            config.verify.n_samples,
            context.seed_for(self.name),
            kernel=context.kernel_for(self.name, EstimatorKind.PGT),
        )


class ElsCheck(BaseCheck):
    name: str = "els"
    description: str = "Expected squared softmax score equals 1 - |pi_s|^2 and obeys G^2"

    def execute(self, context: VerifyContext) -> CheckReport:
        return checks.check_els(
            context.softmax_zeros(context.mdp),
            config.verify.n_pairs,
            context.seed_for(self.name),
        )


class AbcCheck(BaseCheck):
    name: str = "abc"
    description: str = "Second moment of the mini-batch GPOMDP estimate obeys the ABC bound"
    batch_sizes: List[int] = Field(default_factory=lambda: [1, 4, 16])

    def execute(self, context: VerifyContext) -> CheckReport:
        mdp = context.reference_mdp
        policy = context.random_softmax(mdp, self.name)
        horizon = context.horizon or 20
        parts = {}
        for m in self.batch_sizes:
            estimator = EstimatorConfig(kind=EstimatorKind.GPOMDP, m=m, horizon=horizon)
            parts[f"m={m}"] = checks.check_abc(
                mdp,
                policy,
                estimator,
                config.verify.n_samples,
                split_seed(context.seed_for(self.name), m),
                jobs=context.jobs,
            )
        return CheckReport.combine(self.name, parts)


class SmoothnessCheck(BaseCheck):
    name: str = "smoothness_lipschitz"
    description: str = "Exact gradients are L-smooth and Gamma-bounded"

    def _mdps(self, context: VerifyContext) -> Dict[str, TabularMdp]:
        if context.user_mdp:
            return {"mdp": context.mdp}
        seed = context.seed_for(self.name)
        return {
            f"random4_{k}": random_mdp(
                4, 2, REFERENCE_GAMMA, seed=split_seed(seed, k)
            )
            for k in range(SMOOTHNESS_MDPS)
        }

    def execute(self, context: VerifyContext) -> CheckReport:
        mdps = self._mdps(context)
        n_pairs = max(1, config.verify.n_pairs // len(mdps))
        parts = {}
        for k, (label, mdp) in enumerate(mdps.items()):
            policy = context.softmax_zeros(mdp)
            constants = compute_constants(ConstantsSetting.for_problem(mdp, policy))
            parts[label] = checks.check_smoothness_lipschitz(
                mdp,
                policy,
                constants,
                n_pairs,
                config.verify.radius,
                split_seed(context.seed_for(self.name), 1000 + k),
            )
        return CheckReport.combine(self.name, parts)


class TruncationCheck(BaseCheck):
    name: str = "truncation"
    description: str = "Truncated gradients approach the full gradient at rate gamma^H"

    def execute(self, context: VerifyContext) -> CheckReport:
        mdp = context.reference_mdp
        policy = context.random_softmax(mdp, self.name)
        constants = compute_constants(ConstantsSetting.for_problem(mdp, policy))
        return checks.check_truncation(mdp, policy, constants, config.verify.horizons)


class WeakGdCheck(BaseCheck):
    name: str = "weak_gd"
    description: str = "Empirical weak gradient-domination constant along an exact run"

    def execute(self, context: VerifyContext) -> CheckReport:
        return checks.check_weak_gd_along_run(context.exact_run())


class FisherCheck(BaseCheck):
    name: str = "fisher"
    description: str = "Minimum eigenvalue of the exact Fisher information matrix"
    family: PolicyFamily = PolicyFamily.SOFTMAX_TABULAR

    def execute(self, context: VerifyContext) -> CheckReport:
        mdp = context.mdp
        if self.family == PolicyFamily.SOFTMAX_TABULAR:
            policy = context.random_softmax(mdp, self.name)
        else:
            # 每个状态一个单位特征，张成整个参数空间
            policy = PolicyFactory.zeros(
                self.family,
                features=np.eye(mdp.num_states),
                sigma=1.0,
                feature_bound=1.0,
            )
        return checks.estimate_fisher_min_eig(mdp, policy).replace(check_name=self.name)


class ExactFospRateCheck(BaseCheck):
    name: str = "exact_fosp_rate"
    description: str = "Exact PG with eta = 1/L meets the 2 delta0/(eta T) rate on every benchmark"

    def _run(self, context: VerifyContext, mdp: TabularMdp) -> RunRecord:
        constants = compute_constants(
            ConstantsSetting.for_problem(mdp, context.softmax_zeros(mdp))
        )
        return run_pg(
            mdp,
            context.softmax_zeros(mdp),
            ObjectiveSpec(),
            EstimatorConfig(kind=EstimatorKind.GPOMDP, horizon=1),
            StepSchedule(eta=1.0 / constants.L),
            T=max(config.verify.rate_checkpoints),
            base_seed=context.base_seed,
            exact_mode=True,
        )

    def execute(self, context: VerifyContext) -> CheckReport:
        if context.user_mdp:
            mdps = {"mdp": context.mdp}
        else:
            mdps = {name: load_benchmark(name) for name in benchmark_names()}
        parts = {
            label: checks.check_exact_fosp_rate(
                self._run(context, mdp), config.verify.rate_checkpoints
            )
            for label, mdp in mdps.items()
        }
        return CheckReport.combine(self.name, parts)


class TheoremBoundCheck(BaseCheck):
    name: str = "theorem_bound"
    description: str = "Mean squared gradient norm stays below the constant-step bound"

    def execute(self, context: VerifyContext) -> CheckReport:
        run = context.exact_run()
        constants = context.plain_constants(max(config.verify.horizons))
        exact = checks.check_theorem_bound(run, constants, exact_mode=True)
        stochastic = self._stochastic(context)
        return CheckReport.combine(self.name, {"exact": exact, "stochastic": stochastic})

    def _stochastic(self, context: VerifyContext) -> CheckReport:
        """m = 1 的 GPOMDP，步长取自 FOSP 配方，多种子平均"""
        epsilon = config.verify.fosp_epsilon
        recipe = hyperparams_for_fosp(context.plain_constants(1), epsilon)
        constants = context.plain_constants(recipe.H)
        estimator = EstimatorConfig(kind=EstimatorKind.GPOMDP, m=1, horizon=recipe.H)
        n_seeds = config.verify.n_seeds
        seed = context.seed_for(self.name)

        def one_seed(k: int) -> CheckReport:
            run = run_pg(
                context.mdp,
                context.softmax_zeros(context.mdp),
                ObjectiveSpec(),
                estimator,
                StepSchedule(eta=recipe.eta),
                T=config.verify.stochastic_T,
                base_seed=split_seed(seed, k),
            )
            return checks.check_theorem_bound(run, constants)

        if context.jobs <= 1:
            reports = [one_seed(k) for k in range(n_seeds)]
        else:
            with ThreadPoolExecutor(max_workers=context.jobs) as pool:
                reports = list(pool.map(one_seed, range(n_seeds)))

        measured = float(np.mean([report.measured for report in reports]))
        return CheckReport.inequality(
            "theorem_bound",
            measured=measured,
            bound=reports[0].bound,
            per_seed=[report.measured for report in reports],
            epsilon=epsilon,
            eta=recipe.eta,
            H=recipe.H,
            n_seeds=n_seeds,
            base_seed=seed,
        )


class GlobalBarrierCheck(BaseCheck):
    name: str = "global_barrier_exact"
    description: str = "Log-barrier ascent to eps_opt certifies a global gap of at most epsilon"
    mode: str = "exact"

    def execute(self, context: VerifyContext) -> CheckReport:
        return check_global_barrier_pipeline(
            context.mdp,
            config.verify.pipeline_epsilon,
            mode=self.mode,
            budget=PipelineBudget(),
            base_seed=context.seed_for(self.name),
            delta_prob=config.verify.delta_prob,
            jobs=context.jobs,
        )


class CheckCollection:
    """已注册检查的集合。"""

    def __init__(self, *checks_: BaseCheck):
        self.checks = checks_
        self.check_map = {check.name: check for check in checks_}

    def __iter__(self):
        return iter(self.checks)

    def names(self) -> List[str]:
        return [check.name for check in self.checks]

    def get_check(self, name: str) -> BaseCheck:
        if name not in self.check_map:
            raise ConfigError(
                f"unknown check '{name}', available: {', '.join(self.names())}",
                path="/check",
            )
        return self.check_map[name]

    def add_check(self, check: BaseCheck):
        """向集合中添加单个检查，同名检查会被跳过"""
        if check.name in self.check_map:
            logger.warning(f"Check {check.name} already exists in collection, skipping")
            return self

        self.checks += (check,)
        self.check_map[check.name] = check
        return self

    def execute(self, name: str, context: VerifyContext) -> CheckReport:
        check = self.get_check(name)
        logger.info(f"🔎 Running check '{name}'")
        mutation = context.mutation.name if context.mutation else None
        with check_events(name, base_seed=context.base_seed, mutation=mutation):
            event_logger.debug("check_started", user_mdp=context.user_mdp)
            report = check(context)
            event_logger.info(
                "check_finished",
                status=report.status,
                measured=report.measured if np.isscalar(report.measured) else None,
                bound=report.bound,
                margin=report.margin,
            )
        return report

    def execute_all(
        self, context: VerifyContext, names: Optional[Iterable[str]] = None
    ) -> List[CheckReport]:
        """执行给定（缺省为全部）检查，结果按注册顺序返回"""
        selected = list(names) if names is not None else self.names()
        for name in selected:
            self.get_check(name)
        if context.jobs <= 1 or len(selected) == 1:
            return [self.execute(name, context) for name in selected]
        with ThreadPoolExecutor(max_workers=context.jobs) as pool:
            return list(pool.map(lambda name: self.execute(name, context), selected))


def default_suite() -> CheckCollection:
    return CheckCollection(
        UnbiasednessCheck(),
        PgtEquivalenceCheck(),
        ElsCheck(),
        AbcCheck(),
        SmoothnessCheck(),
        TruncationCheck(),
        WeakGdCheck(),
        FisherCheck(),
        FisherCheck(name="fisher_gaussian", family=PolicyFamily.GAUSSIAN_LINEAR),
        ExactFospRateCheck(),
        TheoremBoundCheck(),
        GlobalBarrierCheck(),
        GlobalBarrierCheck(name="global_barrier_stochastic", mode="stochastic"),
    )
