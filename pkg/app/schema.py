from enum import Enum
from typing import Literal


class PolicyFamily(str, Enum):
    """策略族选项"""

    SOFTMAX_TABULAR = "softmax_tabular"
    GAUSSIAN_LINEAR = "gaussian_linear"


class ObjectiveKind(str, Enum):
    """目标函数类型"""

    PLAIN = "plain"
    LOG_BARRIER = "log_barrier"
    ENTROPY = "entropy"


class EstimatorKind(str, Enum):
    """随机梯度估计器类型"""

    REINFORCE = "reinforce"
    GPOMDP = "gpomdp"
    PGT = "pgt"
    BARRIER_REINFORCE = "barrier_reinforce"
    BARRIER_GPOMDP = "barrier_gpomdp"
    ENTROPY = "entropy"


ESTIMATOR_VALUES = tuple(kind.value for kind in EstimatorKind)
ESTIMATOR_TYPE = Literal[ESTIMATOR_VALUES]  # type: ignore


class ScheduleKind(str, Enum):
    """步长调度类型"""

    CONSTANT = "constant"
    WEAK_GD = "weak_gd"
    PL = "pl"


class SweepAxis(str, Enum):
    """扫描实验的坐标轴"""

    M = "m"
    ETA = "eta"
    H = "H"
    LAMBDA = "lambda"
    EPSILON = "epsilon"


class CheckStatus(str, Enum):
    """检查结果状态"""

    PASS = "pass"
    FAIL = "fail"
    INCONCLUSIVE = "inconclusive"
