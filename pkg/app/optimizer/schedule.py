import math
from typing import Optional

from pydantic import BaseModel, ConfigDict, Field, model_validator

from app.exceptions import ConfigError
from app.schema import ScheduleKind
from app.theory.constants import Abc


class StepSchedule(BaseModel):
    """步长调度。

    constant 只需要 eta；weak_gd 与 pl 需要 mu（weak_gd 还需要 delta），
    b 与 t0 总是由 (A, B, L, mu, delta, T) 重新计算，不接受外部指定。
    """

    model_config = ConfigDict(extra="forbid")

    kind: ScheduleKind = ScheduleKind.CONSTANT
    eta: Optional[float] = Field(None, gt=0.0)
    mu: Optional[float] = Field(None, gt=0.0)
    delta: Optional[float] = Field(None, gt=0.0)
    T: Optional[int] = Field(None, ge=0)
    A: float = Field(0.0, ge=0.0)
    B: float = Field(0.0, ge=0.0)
    L: Optional[float] = Field(None, gt=0.0)

    @model_validator(mode="after")
    def _check_inputs(self) -> "StepSchedule":
        if self.kind == ScheduleKind.CONSTANT:
            if self.eta is None:
                raise ConfigError("constant schedule requires eta", path="/schedule/eta")
            return self
        if self.mu is None:
            raise ConfigError(f"{self.kind.value} schedule requires mu", path="/schedule/mu")
        if self.kind == ScheduleKind.WEAK_GD and self.delta is None:
            raise ConfigError("weak_gd schedule requires delta", path="/schedule/delta")
        return self

    def bind(self, abc: Abc, L: float, T: int) -> "StepSchedule":
        """填入 (A, B, L, T) 后返回新的调度"""
        return self.model_copy(update={"A": abc.A, "B": abc.B, "L": L, "T": T})

    @property
    def rate(self) -> float:
        """weak_gd 为 μδ，pl 为 μ"""
        if self.kind == ScheduleKind.WEAK_GD:
            return self.mu * self.delta
        return self.mu

    @property
    def b(self) -> Optional[float]:
        if self.kind == ScheduleKind.CONSTANT:
            return None
        if self.L is None:
            raise ConfigError(
                f"{self.kind.value} schedule is not bound to constants", path="/schedule"
            )
        rate = self.rate
        return max(2.0 * self.A * self.L / rate, 2.0 * self.B * self.L, rate)

    @property
    def t0(self) -> Optional[int]:
        if self.kind == ScheduleKind.CONSTANT or self.T is None:
            return None
        return math.floor(self.T / 2)

    def to_json_dict(self) -> dict:
        data = self.model_dump(exclude_none=True)
        data["kind"] = self.kind.value
        if self.kind != ScheduleKind.CONSTANT and self.L is not None:
            data["b"] = self.b
            data["t0"] = self.t0
        return data


def step_size(schedule: StepSchedule, t: int) -> float:
    if schedule.kind == ScheduleKind.CONSTANT:
        return schedule.eta
    if schedule.T is None or not (0 <= t < schedule.T):
        raise ValueError(f"iteration {t} is outside [0, T) for T = {schedule.T}")

    b, rate = schedule.b, schedule.rate
    if schedule.T <= b / rate or t <= schedule.t0:
        return 1.0 / b
    return 2.0 / (2.0 * b + rate * (t - schedule.t0))
