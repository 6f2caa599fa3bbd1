from typing import Any, Dict, List, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from app.objectives import ObjectiveSpec
from app.schema import EstimatorKind, ObjectiveKind


class EstimatorConfig(BaseModel):
    """估计器类型与 (m, H, λ)，对应实验配置 JSON 中的字段"""

    model_config = ConfigDict(populate_by_name=True)

    kind: EstimatorKind = EstimatorKind.GPOMDP
    m: int = Field(1, ge=1)
    horizon: int = Field(..., ge=1, alias="H")
    lam: float = Field(0.0, ge=0.0, alias="lambda")

    @property
    def objective(self) -> ObjectiveSpec:
        """该估计器无偏估计的（截断）目标"""
        if self.kind in (EstimatorKind.BARRIER_REINFORCE, EstimatorKind.BARRIER_GPOMDP):
            return ObjectiveSpec(kind=ObjectiveKind.LOG_BARRIER, lam=self.lam)
        if self.kind == EstimatorKind.ENTROPY:
            return ObjectiveSpec(kind=ObjectiveKind.ENTROPY, lam=self.lam)
        return ObjectiveSpec()

    @property
    def uses_causal_weighting(self) -> bool:
        """GPOMDP 型（因果加权）估计器，决定取用哪个 ν"""
        return self.kind not in (EstimatorKind.REINFORCE, EstimatorKind.BARRIER_REINFORCE)


class GradientEstimate(BaseModel):
    """一次小批量梯度估计"""

    grad: np.ndarray
    estimator_kind: EstimatorKind
    batch_size: int = Field(..., ge=1)
    horizon: int = Field(..., ge=1)
    seeds: List[int] = Field(default_factory=list)

    class Config:
        arbitrary_types_allowed = True


class MomentStats(BaseModel):
    """批量估计的一阶与二阶矩统计"""

    mean: np.ndarray
    second_moment: float
    variance: float
    n_samples: int
    std_error_second_moment: float
    extra: Dict[str, Any] = Field(default_factory=dict)

    class Config:
        arbitrary_types_allowed = True

    def to_json_dict(self) -> Dict[str, Any]:
        return {
            "mean": [float(x) for x in self.mean],
            "second_moment": self.second_moment,
            "variance": self.variance,
            "n_samples": self.n_samples,
            "std_error_second_moment": self.std_error_second_moment,
            **self.extra,
        }


class WelfordState:
    """ĝ 向量均值、‖ĝ‖² 均值及其离差平方和的流式累积"""

    def __init__(self, dim: int):
        self.count = 0
        self.mean = np.zeros(dim)
        self.m2_vector = np.zeros(dim)
        self.sq_mean = 0.0
        self.sq_m2 = 0.0

    def update(self, sample: np.ndarray) -> None:
        self.count += 1
        delta = sample - self.mean
        self.mean = self.mean + delta / self.count
        self.m2_vector = self.m2_vector + delta * (sample - self.mean)

        sq = float(np.dot(sample, sample))
        sq_delta = sq - self.sq_mean
        self.sq_mean += sq_delta / self.count
        self.sq_m2 += sq_delta * (sq - self.sq_mean)

    def merge(self, other: "WelfordState") -> "WelfordState":
        """Chan 并行合并公式；合并顺序固定时结果可复现"""
        if other.count == 0:
            return self
        if self.count == 0:
            return other
        merged = WelfordState(self.mean.shape[0])
        n = self.count + other.count
        delta = other.mean - self.mean
        merged.count = n
        merged.mean = self.mean + delta * (other.count / n)
        merged.m2_vector = (
            self.m2_vector + other.m2_vector + delta**2 * (self.count * other.count / n)
        )
        sq_delta = other.sq_mean - self.sq_mean
        merged.sq_mean = self.sq_mean + sq_delta * (other.count / n)
        merged.sq_m2 = self.sq_m2 + other.sq_m2 + sq_delta**2 * (
            self.count * other.count / n
        )
        return merged

    def to_stats(self, extra: Optional[Dict[str, Any]] = None) -> MomentStats:
        variance = float(np.sum(self.m2_vector)) / self.count
        if -1e-9 < variance < 0.0:
            variance = 0.0
        std = np.sqrt(self.sq_m2 / (self.count - 1)) if self.count > 1 else 0.0
        return MomentStats(
            mean=self.mean,
            second_moment=float(self.sq_mean),
            variance=variance,
            n_samples=self.count,
            std_error_second_moment=float(std / np.sqrt(self.count)),
            extra=extra or {},
        )
