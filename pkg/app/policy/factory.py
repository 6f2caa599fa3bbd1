import json
from pathlib import Path
from typing import Any, Dict, Optional, Union

import numpy as np

from app.exceptions import PolicyFamilyError
from app.policy.base import BasePolicy
from app.policy.gaussian import GaussianLinearPolicy
from app.policy.softmax import SoftmaxTabularPolicy
from app.schema import PolicyFamily


class PolicyFactory:
    """用于创建不同策略族的工厂类"""

    @staticmethod
    def create(
        family: Union[PolicyFamily, str], theta: Optional[np.ndarray] = None, **kwargs
    ) -> BasePolicy:
        """创建指定族的策略

        Args:
            family: 策略族
            theta: 参数向量；为 None 时使用全零初始化
            **kwargs: 族特有的元数据

        Returns:
            创建的策略实例

        Raises:
            PolicyFamilyError: 如果策略族未知
        """
        policies = {
            PolicyFamily.SOFTMAX_TABULAR: SoftmaxTabularPolicy,
            PolicyFamily.GAUSSIAN_LINEAR: GaussianLinearPolicy,
        }
        try:
            family = PolicyFamily(family)
        except ValueError as e:
            raise PolicyFamilyError(f"Unknown policy family: {family}") from e

        policy_class = policies[family]
        if theta is None:
            theta = np.zeros(PolicyFactory.parameter_dim(family, **kwargs))
        return policy_class(family=family, theta=theta, **kwargs)

    @staticmethod
    def parameter_dim(family: PolicyFamily, **kwargs) -> int:
        if family == PolicyFamily.SOFTMAX_TABULAR:
            return int(kwargs["num_states"]) * int(kwargs["num_actions"])
        features = np.asarray(kwargs["features"], dtype=np.float64)
        return 1 if features.ndim == 1 else int(features.shape[1])

    @staticmethod
    def zeros(family: Union[PolicyFamily, str], **kwargs) -> BasePolicy:
        return PolicyFactory.create(family, theta=None, **kwargs)

    @staticmethod
    def uniform_random(
        family: Union[PolicyFamily, str], scale: float, seed: int, **kwargs
    ) -> BasePolicy:
        """θ 的每个分量独立取自 U(−scale, scale)"""
        dim = PolicyFactory.parameter_dim(PolicyFamily(family), **kwargs)
        theta = np.random.default_rng(seed).uniform(-scale, scale, size=dim)
        return PolicyFactory.create(family, theta=theta, **kwargs)

    @staticmethod
    def from_dict(data: Dict[str, Any]) -> BasePolicy:
        data = dict(data)
        if "family" not in data:
            raise PolicyFamilyError("policy document is missing the family tag")
        family = data.pop("family")
        theta = data.pop("theta", None)
        return PolicyFactory.create(family, theta=theta, **data)


def dump_policy(policy: BasePolicy) -> str:
    return json.dumps(policy.to_dict())


def loads_policy(text: str) -> BasePolicy:
    return PolicyFactory.from_dict(json.loads(text))


def load_policy(path: Union[str, Path]) -> BasePolicy:
    """从 JSON 文件读取策略"""
    return loads_policy(Path(path).read_text(encoding="utf-8"))
