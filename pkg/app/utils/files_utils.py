import json
from enum import Enum
from pathlib import Path
from typing import Any, Iterable, Mapping, Union

import numpy as np
from pydantic import BaseModel


PathLike = Union[str, Path]


def to_jsonable(value: Any) -> Any:
    """Convert numpy arrays/scalars, enums and pydantic models into plain JSON types

    Args:
        value: Arbitrary nested structure

    Returns:
        A structure that json.dumps accepts
    """
    if isinstance(value, BaseModel):
        value = value.model_dump()
    if isinstance(value, Mapping):
        return {str(key): to_jsonable(item) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(item) for item in value]
    if isinstance(value, np.ndarray):
        return to_jsonable(value.tolist())
    if isinstance(value, Enum):
        return value.value
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    if isinstance(value, np.bool_):
        return bool(value)
    if isinstance(value, Path):
        return str(value)
    return value


def dumps(value: Any, pretty: bool = False) -> str:
    """Serialize deterministically: sorted keys, repr-exact floats"""
    if pretty:
        return json.dumps(to_jsonable(value), indent=2, sort_keys=True)
    return json.dumps(to_jsonable(value), sort_keys=True, separators=(",", ":"))


def write_json(path: PathLike, value: Any) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps(value, pretty=True) + "\n", encoding="utf-8")
    return path


def write_jsonl(path: PathLike, rows: Iterable[Any]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(dumps(row) + "\n")
    return path


def read_json(path: PathLike) -> Any:
    return json.loads(Path(path).read_text(encoding="utf-8"))
