from abc import ABC, abstractmethod
from typing import Any, Dict, Optional

import numpy as np
from pydantic import BaseModel, Field, field_validator

from app.exceptions import PolicyFamilyError
from app.schema import PolicyFamily


class ElsConstants(BaseModel):
    """期望 Lipschitz 与光滑（E-LS）常数 (G², F)。

    g_squared_ls 是非期望 LS 版本的 G²（仅 softmax 提供）。
    """

    g_squared: float = Field(..., ge=0.0)
    f: float = Field(..., ge=0.0)
    g_squared_ls: Optional[float] = Field(None, ge=0.0)


class ElsMeasurement(BaseModel):
    """某个状态下 E_a‖score‖² 与 E_a‖log Hessian‖ 的实测值"""

    measured_g2: float
    measured_f: float
    std_error_g2: float = 0.0
    std_error_f: float = 0.0
    n_samples: Optional[int] = Field(
        None, description="蒙特卡洛样本数；精确求和时为 None"
    )


class BasePolicy(ABC, BaseModel):
    """参数化策略的基类。

    策略在构造后不可变：所有访问器都是纯函数，参数更新通过
    `with_theta` 生成新对象。
    """

    family: PolicyFamily
    theta: np.ndarray

    class Config:
        arbitrary_types_allowed = True
        frozen = True

    @field_validator("theta", mode="before")
    @classmethod
    def _as_array(cls, value: Any) -> np.ndarray:
        array = np.array(value, dtype=np.float64).reshape(-1)
        array.setflags(write=False)
        return array

    @property
    def dim(self) -> int:
        return int(self.theta.shape[0])

    @property
    def is_tabular(self) -> bool:
        """是否为离散动作策略（可用于表格 MDP 的精确预言机与轨迹采样）"""
        return False

    def with_theta(self, theta: np.ndarray) -> "BasePolicy":
        """返回替换参数后的新策略"""
        return type(self)(**{**self._metadata(), "family": self.family, "theta": theta})

    @abstractmethod
    def _metadata(self) -> Dict[str, Any]:
        """策略族特有的元数据（不含 theta）"""

    @abstractmethod
    def score(self, s: int, a: Any) -> np.ndarray:
        """∇_θ log π_θ(a|s)"""

    @abstractmethod
    def log_hessian(self, s: int, a: Any) -> np.ndarray:
        """∇²_θ log π_θ(a|s)"""

    @abstractmethod
    def els_constants(self) -> ElsConstants:
        """该策略族的 E-LS 常数"""

    @abstractmethod
    def empirical_els_check(self, s: int, **kwargs) -> ElsMeasurement:
        """在状态 s 实测 E-LS 所约束的两个期望"""

    def action_matrix(self) -> np.ndarray:
        """π(a|s) 组成的 (S, A) 矩阵"""
        raise PolicyFamilyError(
            f"{self.family.value} policies have continuous actions; "
            "tabular oracles need a discrete-action policy"
        )

    def log_prob_table(self) -> np.ndarray:
        raise PolicyFamilyError(
            f"{self.family.value} policies have no tabular log-probabilities"
        )

    def score_table(self) -> np.ndarray:
        """score(s, a) 组成的 (S, A, d) 张量"""
        raise PolicyFamilyError(
            f"{self.family.value} policies have no tabular score table"
        )

    def to_dict(self) -> Dict[str, Any]:
        """带族标签、元数据和 theta 的 JSON 字典"""
        return {
            "family": self.family.value,
            **self._metadata(),
            "theta": [float(x) for x in self.theta],
        }
