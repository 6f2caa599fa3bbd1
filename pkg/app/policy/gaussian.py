from typing import Any, Dict, Optional

import numpy as np
from pydantic import Field, field_validator, model_validator

from app.exceptions import PolicyFamilyError
from app.logger import logger
from app.policy.base import BasePolicy, ElsConstants, ElsMeasurement
from app.schema import PolicyFamily
from app.utils.seeding import make_rng


class GaussianLinearPolicy(BasePolicy):
    """标量动作、固定方差的高斯策略 a ~ N(θᵀφ(s), σ²)。

    特征映射以表格形式给出：features[s] = φ(s)。只用于 score 与常数验证，
    不参与表格 MDP 的轨迹采样。
    """

    family: PolicyFamily = PolicyFamily.GAUSSIAN_LINEAR
    features: np.ndarray
    sigma: float = Field(..., gt=0.0)
    feature_bound: float = Field(..., gt=0.0)

    @field_validator("features", mode="before")
    @classmethod
    def _features_as_matrix(cls, value: Any) -> np.ndarray:
        array = np.array(value, dtype=np.float64)
        if array.ndim == 1:
            array = array[:, None]
        array.setflags(write=False)
        return array

    @model_validator(mode="after")
    def _check_features(self) -> "GaussianLinearPolicy":
        if self.features.shape[1] != self.dim:
            raise PolicyFamilyError(
                f"feature dimension {self.features.shape[1]} does not match "
                f"theta length {self.dim}"
            )
        # 只能在给定的状态上抽查 sup_s ‖φ(s)‖ ≤ φ̄
        norms = np.linalg.norm(self.features, axis=1)
        if np.any(norms > self.feature_bound * (1.0 + 1e-12)):
            worst = int(np.argmax(norms))
            raise PolicyFamilyError(
                f"feature norm {norms[worst]} at state {worst} exceeds "
                f"feature_bound {self.feature_bound}"
            )
        return self

    def _metadata(self) -> Dict[str, Any]:
        return {
            "features": self.features.tolist(),
            "sigma": self.sigma,
            "feature_bound": self.feature_bound,
        }

    def phi(self, s: int) -> np.ndarray:
        return self.features[s]

    def mean(self, s: int) -> float:
        return float(np.dot(self.theta, self.phi(s)))

    def score(self, s: int, a: float) -> np.ndarray:
        phi = self.phi(s)
        return ((a - np.dot(self.theta, phi)) / self.sigma**2) * phi

    def log_hessian(self, s: int, a: float) -> np.ndarray:
        phi = self.phi(s)
        return -np.outer(phi, phi) / self.sigma**2

    def els_constants(self) -> ElsConstants:
        bound = self.feature_bound**2 / self.sigma**2
        return ElsConstants(g_squared=bound, f=bound)

    def empirical_els_check(
        self, s: int, n_samples: int = 100_000, seed: Optional[int] = 0, **kwargs
    ) -> ElsMeasurement:
        """对动作做蒙特卡洛估计并给出标准误。

        Hessian 与动作无关，所以 F 的实测值是精确的。
        """
        rng = make_rng(seed)
        phi = self.phi(s)
        actions = self.mean(s) + self.sigma * rng.standard_normal(n_samples)
        residual = (actions - self.mean(s)) / self.sigma**2
        score_sq = residual**2 * float(np.dot(phi, phi))
        measured_g2 = float(np.mean(score_sq))
        std_error = float(np.std(score_sq, ddof=1) / np.sqrt(n_samples))
        measured_f = float(np.linalg.norm(self.log_hessian(s, 0.0), ord=2))
        logger.debug(
            f"Gaussian E-LS check at s={s}: g2={measured_g2:.6g} ± {std_error:.2g}"
        )
        return ElsMeasurement(
            measured_g2=measured_g2,
            measured_f=measured_f,
            std_error_g2=std_error,
            n_samples=n_samples,
        )

    def score_mean_check(
        self, s: int, n_samples: int = 100_000, seed: Optional[int] = 0
    ) -> tuple:
        """score 在 π(·|s) 下的样本均值与标准误（理论上为 0）"""
        rng = make_rng(seed)
        actions = self.mean(s) + self.sigma * rng.standard_normal(n_samples)
        residual = (actions - self.mean(s)) / self.sigma**2
        scores = residual[:, None] * self.phi(s)[None, :]
        mean = scores.mean(axis=0)
        std_error = scores.std(axis=0, ddof=1) / np.sqrt(n_samples)
        return mean, std_error
