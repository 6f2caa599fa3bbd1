import threading
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from pathlib import Path
from typing import List, Literal, Optional

from pydantic import BaseModel, Field


def get_project_root() -> Path:
    """获取项目根目录"""
    return Path(__file__).resolve().parent.parent


PROJECT_ROOT = get_project_root()


class DPSettings(BaseModel):
    """动态规划求解器的配置"""

    tol: float = Field(1e-10, description="值函数与占用测度的求解容差（最大范数）")
    prob_tol: float = Field(1e-12, description="概率向量归一化检查的容差")
    iteration_margin: int = Field(
        10, description="在解析迭代上限之外额外允许的迭代次数"
    )
    method: Literal["iterate", "direct"] = Field(
        "iterate", description="贝尔曼方程求解方式：不动点迭代或稠密线性求解"
    )


class SamplingSettings(BaseModel):
    """轨迹采样与并发的配置"""

    jobs: int = Field(1, ge=1, description="并发工作线程数")
    chunk_size: int = Field(
        256, ge=1, description="矩统计中每个分片的样本数（与 jobs 无关，保证可复现）"
    )


class VerifySettings(BaseModel):
    """假设验证工具的默认预算"""

    n_samples: int = Field(10000, description="ABC 检查的蒙特卡洛批次数")
    n_pairs: int = Field(1000, description="光滑性检查的参数对数量")
    radius: float = Field(1.0, description="参数对之间的最大距离")
    theta_scale: float = Field(2.0, description="随机参数 θ ~ U(−scale, scale) 的半宽")
    horizons: List[int] = Field(
        default_factory=lambda: list(range(1, 51)),
        description="截断检查使用的 H 列表",
    )
    n_seeds: int = Field(20, description="多种子聚合使用的种子数")
    mu_cap: float = Field(1e12, description="弱梯度支配估计 μ 的上限")
    enumeration_limit: int = Field(
        1_000_000, description="完全轨迹枚举允许的最大路径数"
    )
    unbiasedness_tol: float = Field(1e-10, description="无偏性检查的最大分量误差")
    rate_checkpoints: List[int] = Field(
        default_factory=lambda: [100, 1000, 10000],
        description="精确 PG 的 FOSP 速率检查点 T",
    )
    run_T: int = Field(1000, description="弱梯度支配与定理界检查使用的精确运行长度")
    stochastic_T: int = Field(200, description="随机 PG 定理界检查的迭代数")
    fosp_epsilon: float = Field(0.3, description="随机 PG 定理界检查的目标精度")
    pipeline_epsilon: float = Field(0.25, description="全局最优流程的目标间隙")
    delta_prob: float = Field(0.3, description="随机全局流程允许的失败概率")
    pipeline_iterations: int = Field(100_000, description="精确全局流程的迭代上限")
    pipeline_stochastic_iterations: int = Field(
        5_000, description="随机全局流程每个种子的迭代上限"
    )
    pipeline_m: int = Field(32, description="随机全局流程的批大小")


class OutputSettings(BaseModel):
    dir: str = Field("workspace/outputs", description="默认输出目录（相对项目根目录）")


class LoggingSettings(BaseModel):
    level: str = Field("INFO", description="终端日志级别")
    file_level: str = Field("DEBUG", description="日志文件级别")
    dir: str = Field("logs", description="滚动日志目录，相对路径基于项目根目录")
    event_format: Literal["console", "json"] = Field(
        "console", description="检查事件的渲染方式"
    )


class AppConfig(BaseModel):
    dp: DPSettings = Field(default_factory=DPSettings)
    sampling: SamplingSettings = Field(default_factory=SamplingSettings)
    verify: VerifySettings = Field(default_factory=VerifySettings)
    output: OutputSettings = Field(default_factory=OutputSettings)
    logging: LoggingSettings = Field(default_factory=LoggingSettings)


class Config:
    _instance = None
    _lock = threading.Lock()
    _initialized = False

    def __new__(cls):
        if cls._instance is None:
            with cls._lock:
                if cls._instance is None:
                    cls._instance = super().__new__(cls)
        return cls._instance

    def __init__(self):
        if not self._initialized:
            with self._lock:
                if not self._initialized:
                    self._config = None
                    self._load_initial_config()
                    self._initialized = True

    @staticmethod
    def _get_config_path() -> Optional[Path]:
        root = PROJECT_ROOT
        config_path = root / "config" / "config.toml"
        if config_path.exists():
            return config_path
        example_path = root / "config" / "config.example.toml"
        if example_path.exists():
            return example_path
        return None

    def _load_config(self) -> dict:
        config_path = self._get_config_path()
        if config_path is None:
            return {}
        with config_path.open("rb") as f:
            return tomllib.load(f)

    def _load_initial_config(self):
        raw_config = self._load_config()

        # 只保留已知的配置节，未知的节直接忽略
        sections = {
            name: raw_config.get(name, {})
            for name in AppConfig.model_fields
            if isinstance(raw_config.get(name, {}), dict)
        }
        self._config = AppConfig(**sections)

    @property
    def dp(self) -> DPSettings:
        return self._config.dp

    @property
    def sampling(self) -> SamplingSettings:
        return self._config.sampling

    @property
    def verify(self) -> VerifySettings:
        return self._config.verify

    @property
    def output(self) -> OutputSettings:
        return self._config.output

    @property
    def logging(self) -> LoggingSettings:
        return self._config.logging

    @property
    def output_root(self) -> Path:
        """获取默认输出目录"""
        path = Path(self._config.output.dir)
        return path if path.is_absolute() else PROJECT_ROOT / path


config = Config()
