import json
from pathlib import Path
from typing import Any, Dict, Optional, Union

import numpy as np
from pydantic import BaseModel, Field, field_validator

from app.config import config
from app.exceptions import InvalidMdpError


class TabularMdp(BaseModel):
    """有限表格型折扣 MDP。

    rewards 以 (s, a) 索引，transitions 以 (s, a, s') 索引。
    """

    num_states: int = Field(..., gt=0)
    num_actions: int = Field(..., gt=0)
    transitions: np.ndarray
    rewards: np.ndarray
    r_max: float = Field(..., gt=0)
    gamma: float
    initial_dist: np.ndarray

    class Config:
        arbitrary_types_allowed = True

    @field_validator("transitions", "rewards", "initial_dist", mode="before")
    @classmethod
    def _as_array(cls, value: Any) -> np.ndarray:
        return np.asarray(value, dtype=np.float64)

    @property
    def shape(self) -> tuple:
        return self.num_states, self.num_actions

    def to_dict(self) -> Dict[str, Any]:
        """按行主序展开为 JSON 友好的字典"""
        return {
            "num_states": self.num_states,
            "num_actions": self.num_actions,
            "gamma": self.gamma,
            "r_max": self.r_max,
            "initial_dist": self.initial_dist.tolist(),
            "rewards": self.rewards.reshape(-1).tolist(),
            "transitions": self.transitions.reshape(-1).tolist(),
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any], check: bool = True) -> "TabularMdp":
        """从 JSON 文档构造；rewards/transitions 可以是扁平数组或嵌套数组"""
        try:
            n_s = int(data["num_states"])
            n_a = int(data["num_actions"])
            mdp = cls(
                num_states=n_s,
                num_actions=n_a,
                gamma=float(data["gamma"]),
                r_max=float(data["r_max"]),
                initial_dist=np.asarray(data["initial_dist"], dtype=np.float64),
                rewards=np.asarray(data["rewards"], dtype=np.float64).reshape(n_s, n_a),
                transitions=np.asarray(data["transitions"], dtype=np.float64).reshape(
                    n_s, n_a, n_s
                ),
            )
        except KeyError as e:
            raise InvalidMdpError(f"MDP document is missing field {e}") from e
        except ValueError as e:
            raise InvalidMdpError(f"MDP document has malformed arrays: {e}") from e
        if check:
            validate(mdp)
        return mdp

    def with_rewards(self, rewards: np.ndarray, r_max: Optional[float] = None) -> "TabularMdp":
        """返回替换奖励表后的新 MDP"""
        return self.model_copy(
            update={
                "rewards": np.asarray(rewards, dtype=np.float64),
                "r_max": self.r_max if r_max is None else float(r_max),
            }
        )


def validate(mdp: TabularMdp, prob_tol: Optional[float] = None) -> None:
    """检查所有 MDP 不变量，报告第一个违反项。

    Raises:
        InvalidMdpError: 带有违反位置 (s, a) 和数值的错误。
    """
    tol = config.dp.prob_tol if prob_tol is None else prob_tol
    n_s, n_a = mdp.num_states, mdp.num_actions

    if mdp.transitions.shape != (n_s, n_a, n_s):
        raise InvalidMdpError(
            f"transitions has shape {mdp.transitions.shape}, expected {(n_s, n_a, n_s)}"
        )
    if mdp.rewards.shape != (n_s, n_a):
        raise InvalidMdpError(
            f"rewards has shape {mdp.rewards.shape}, expected {(n_s, n_a)}"
        )
    if mdp.initial_dist.shape != (n_s,):
        raise InvalidMdpError(
            f"initial_dist has shape {mdp.initial_dist.shape}, expected {(n_s,)}"
        )
    if not 0.0 <= mdp.gamma < 1.0:
        raise InvalidMdpError(f"gamma must lie in [0, 1), got {mdp.gamma}", value=mdp.gamma)

    for s in range(n_s):
        for a in range(n_a):
            row = mdp.transitions[s, a]
            if not np.all(np.isfinite(row)) or np.any(row < 0.0):
                worst = int(np.argmin(np.nan_to_num(row, nan=-np.inf)))
                raise InvalidMdpError(
                    f"transition row (s={s}, a={a}) has negative or non-finite entry "
                    f"{row[worst]} at s'={worst}",
                    index=(s, a, worst),
                    value=float(row[worst]),
                )
            total = float(row.sum())
            if abs(total - 1.0) > tol:
                raise InvalidMdpError(
                    f"transition row (s={s}, a={a}) sums to {total!r}, expected 1",
                    index=(s, a),
                    value=total,
                )

    rho = mdp.initial_dist
    if not np.all(np.isfinite(rho)) or np.any(rho < 0.0):
        worst = int(np.argmin(np.nan_to_num(rho, nan=-np.inf)))
        raise InvalidMdpError(
            f"initial_dist has negative or non-finite entry {rho[worst]} at s={worst}",
            index=(worst,),
            value=float(rho[worst]),
        )
    total = float(rho.sum())
    if abs(total - 1.0) > tol:
        raise InvalidMdpError(
            f"initial_dist sums to {total!r}, expected 1", value=total
        )

    excess = np.abs(mdp.rewards) > mdp.r_max
    if not np.all(np.isfinite(mdp.rewards)) or np.any(excess):
        bad = ~np.isfinite(mdp.rewards) | excess
        s, a = (int(i) for i in np.argwhere(bad)[0])
        raise InvalidMdpError(
            f"reward at (s={s}, a={a}) is {mdp.rewards[s, a]}, outside "
            f"[-{mdp.r_max}, {mdp.r_max}]",
            index=(s, a),
            value=float(mdp.rewards[s, a]),
        )


def load_mdp(path: Union[str, Path]) -> TabularMdp:
    """读取 MDP JSON 文件并校验"""
    path = Path(path)
    if not path.exists():
        raise InvalidMdpError(f"MDP file not found: {path}")
    with path.open("r", encoding="utf-8") as f:
        try:
            data = json.load(f)
        except json.JSONDecodeError as e:
            raise InvalidMdpError(f"MDP file {path} is not valid JSON: {e}") from e
    return TabularMdp.from_dict(data)


def save_mdp(mdp: TabularMdp, path: Union[str, Path]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as f:
        json.dump(mdp.to_dict(), f, indent=2)
