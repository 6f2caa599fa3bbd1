from typing import Any, Optional, Tuple


class VanillaPGError(Exception):
    """所有 vanillapg 错误的基础异常"""


class InvalidMdpError(VanillaPGError):
    """当 MDP 不满足不变量时引发，记录违反的位置与数值"""

    def __init__(
        self,
        message: str,
        index: Optional[Tuple[int, ...]] = None,
        value: Optional[float] = None,
    ):
        super().__init__(message)
        self.message = message
        self.index = index
        self.value = value


class PolicyFamilyError(VanillaPGError):
    """当操作不支持给定的策略族时引发"""


class ConvergenceError(VanillaPGError):
    """当不动点迭代在上限内未达到容差时引发"""


class EnumerationTooLargeError(VanillaPGError):
    """当完全轨迹枚举超过允许的路径数时引发"""


class NonFiniteIterateError(VanillaPGError):
    """当参数或梯度出现非有限值时引发"""

    def __init__(self, message: str, iteration: int, record: Any = None):
        super().__init__(message)
        self.message = message
        self.iteration = iteration
        # 发散前已完成的逐轮记录（RunRecord），由 run_pg 附加
        self.record = record


class StepSizeWindowError(VanillaPGError):
    """当步长不在定理允许的窗口内时引发"""


class ConfigError(VanillaPGError):
    """实验配置错误，path 为 JSON pointer"""

    def __init__(self, message: str, path: str = ""):
        super().__init__(f"{path}: {message}" if path else message)
        self.message = message
        self.path = path
