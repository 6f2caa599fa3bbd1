"""检查事件的结构化日志。

每个事件携带 check / base_seed / mutation 等上下文；渲染方式由 [logging].event_format
决定，环境变量 ENV_MODE 非 local 时强制输出 JSON 行，便于收集 verify 结果。
"""
import logging
import os
from contextlib import contextmanager
from typing import Any, Iterator, List

import structlog
from structlog.typing import EventDict, Processor, WrappedLogger

from app.config import config
from app.utils.files_utils import to_jsonable


ENV_MODE = os.getenv("ENV_MODE", "LOCAL")


def jsonable_values(_: WrappedLogger, __: str, event_dict: EventDict) -> EventDict:
    """numpy 标量/数组与枚举转为内置类型"""
    return {key: to_jsonable(value) for key, value in event_dict.items()}


def _renderer() -> List[Processor]:
    if ENV_MODE.lower() != "local" or config.logging.event_format == "json":
        return [structlog.processors.JSONRenderer()]
    return [structlog.dev.ConsoleRenderer()]


structlog.configure(
    processors=[
        structlog.contextvars.merge_contextvars,
        structlog.stdlib.add_log_level,
        structlog.processors.CallsiteParameterAdder(
            {
                structlog.processors.CallsiteParameter.FUNC_NAME,
                structlog.processors.CallsiteParameter.LINENO,
            }
        ),
        structlog.processors.TimeStamper(fmt="iso"),
        jsonable_values,
        *_renderer(),
    ],
    cache_logger_on_first_use=True,
)


@contextmanager
def check_events(check: str, **context: Any) -> Iterator[None]:
    """把检查名与上下文绑定到当前线程内发出的所有事件"""
    with structlog.contextvars.bound_contextvars(check=check, **context):
        yield


logger: structlog.stdlib.BoundLogger = structlog.get_logger(level=logging.DEBUG)
