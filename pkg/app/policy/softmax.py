from typing import Any, Dict

import numpy as np
from pydantic import Field, model_validator

from app.exceptions import PolicyFamilyError
from app.policy.base import BasePolicy, ElsConstants, ElsMeasurement
from app.schema import PolicyFamily


def stable_softmax(logits: np.ndarray) -> np.ndarray:
    """沿最后一维做减最大值的 softmax"""
    shifted = logits - np.max(logits, axis=-1, keepdims=True)
    weights = np.exp(shifted)
    return weights / np.sum(weights, axis=-1, keepdims=True)


def stable_log_softmax(logits: np.ndarray) -> np.ndarray:
    """log-sum-exp 形式的 log softmax，避免 log(0)"""
    shifted = logits - np.max(logits, axis=-1, keepdims=True)
    return shifted - np.log(np.sum(np.exp(shifted), axis=-1, keepdims=True))


def softmax_jacobian(p: np.ndarray) -> np.ndarray:
    """H(p) = Diag(p) − p pᵀ"""
    return np.diag(p) - np.outer(p, p)


class SoftmaxTabularPolicy(BasePolicy):
    """表格 softmax 策略 π_θ(a|s) ∝ exp(θ_{s,a})。

    参数按状态行主序排列：index(s, a) = s·|A| + a。
    """

    family: PolicyFamily = PolicyFamily.SOFTMAX_TABULAR
    num_states: int = Field(..., gt=0)
    num_actions: int = Field(..., gt=0)

    @model_validator(mode="after")
    def _check_layout(self) -> "SoftmaxTabularPolicy":
        expected = self.num_states * self.num_actions
        if self.theta.shape != (expected,):
            raise PolicyFamilyError(
                f"softmax theta must have length {expected}, got {self.theta.shape[0]}"
            )
        return self

    @property
    def is_tabular(self) -> bool:
        return True

    def _metadata(self) -> Dict[str, Any]:
        return {"num_states": self.num_states, "num_actions": self.num_actions}

    def index(self, s: int, a: int) -> int:
        return s * self.num_actions + a

    def logits(self) -> np.ndarray:
        return self.theta.reshape(self.num_states, self.num_actions)

    def action_probs(self, s: int) -> np.ndarray:
        return stable_softmax(self.logits()[s])

    def action_matrix(self) -> np.ndarray:
        return stable_softmax(self.logits())

    def log_prob_table(self) -> np.ndarray:
        return stable_log_softmax(self.logits())

    def score(self, s: int, a: int) -> np.ndarray:
        grad = np.zeros(self.dim)
        block = -self.action_probs(s)
        block[a] += 1.0
        grad[s * self.num_actions : (s + 1) * self.num_actions] = block
        return grad

    def score_table(self) -> np.ndarray:
        n_s, n_a = self.num_states, self.num_actions
        probs = self.action_matrix()
        blocks = np.eye(n_a)[None, :, :] - probs[:, None, :]  # (S, A, A)
        table = np.zeros((n_s, n_a, n_s, n_a))
        states = np.arange(n_s)
        table[states, :, states, :] = blocks
        return table.reshape(n_s, n_a, n_s * n_a)

    def log_hessian(self, s: int, a: int) -> np.ndarray:
        n_a = self.num_actions
        hessian = np.zeros((self.dim, self.dim))
        block = slice(s * n_a, (s + 1) * n_a)
        hessian[block, block] = -softmax_jacobian(self.action_probs(s))
        return hessian

    def stacked_probs(self) -> np.ndarray:
        """按参数布局堆叠的 π_s 向量"""
        return self.action_matrix().reshape(-1)

    def els_constants(self) -> ElsConstants:
        return ElsConstants(
            g_squared=1.0 - 1.0 / self.num_actions, f=1.0, g_squared_ls=2.0
        )

    def empirical_els_check(self, s: int, **kwargs) -> ElsMeasurement:
        """对动作做精确有限和。

        E‖score‖² = Σ_a π_a (1 + ‖π‖² − 2π_a) = 1 − ‖π‖²；
        log Hessian 与动作无关，其谱范数即 E‖∇² log π‖。
        """
        p = self.action_probs(s)
        score_sq = 1.0 + np.dot(p, p) - 2.0 * p
        measured_g2 = float(np.dot(p, score_sq))
        measured_f = float(np.linalg.norm(softmax_jacobian(p), ord=2))
        return ElsMeasurement(measured_g2=measured_g2, measured_f=measured_f)
