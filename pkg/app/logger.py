import sys
from contextlib import contextmanager
from datetime import datetime
from pathlib import Path
from typing import Iterator, Optional, Union

from loguru import logger as _logger

from app.config import PROJECT_ROOT, config


# 文件 sink 的格式：时间 | 级别 | 位置 - 消息
LOG_FORMAT = (
    "{time:YYYY-MM-DD HH:mm:ss.SSS} | {level: <8} | "
    "{name}:{function}:{line} - {message}"
)

_print_level = "INFO"


def _log_dir() -> Path:
    path = Path(config.logging.dir)
    return path if path.is_absolute() else PROJECT_ROOT / path


def define_log_level(
    print_level: Optional[str] = None,
    logfile_level: Optional[str] = None,
    name: Optional[str] = None,
):
    """重新配置终端与滚动日志文件的级别；缺省取 [logging] 配置。

    name 为子命令名时日志文件为 <logging.dir>/<name>_<时间戳>.log。
    """
    global _print_level
    _print_level = print_level or config.logging.level
    logfile_level = logfile_level or config.logging.file_level

    formatted_date = datetime.now().strftime("%Y%m%d%H%M%S")
    log_name = f"{name}_{formatted_date}" if name else formatted_date

    _logger.remove()
    _logger.add(sys.stderr, level=_print_level)
    _logger.add(_log_dir() / f"{log_name}.log", level=logfile_level, format=LOG_FORMAT)
    return _logger


@contextmanager
def command_log(output_dir: Union[str, Path], command: str) -> Iterator[Path]:
    """在输出目录旁写一份 <command>.log，与该次调用的结果文件放在一起"""
    path = Path(output_dir) / f"{command}.log"
    sink_id = _logger.add(
        path, level=config.logging.file_level, format=LOG_FORMAT, encoding="utf-8"
    )
    try:
        yield path
    finally:
        _logger.remove(sink_id)


logger = define_log_level()
