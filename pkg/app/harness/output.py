"""运行产物的写出。

数据文件（JSONL/CSV/summary）只依赖配置与种子；时间戳只出现在 run_meta.json 中。
"""
import platform
import sys
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

import numpy as np
import pandas as pd

from app.optimizer.runner import ROW_COLUMNS, RunRecord
from app.utils.files_utils import PathLike, write_json, write_jsonl
from app.verify.report import CheckReport


SWEEP_COLUMNS = (
    "axis",
    "value",
    "seed",
    "final_gap",
    "min_grad_norm_sq",
    "trajectories",
    "env_steps",
    "T",
    "m",
    "H",
    "eta",
)
AGGREGATE_METRICS = ("final_gap", "min_grad_norm_sq", "env_steps")
FLOAT_FORMAT = "%.17g"


def run_stem(seed: int) -> str:
    return f"run_seed{seed}"


def rows_frame(record: RunRecord) -> pd.DataFrame:
    return pd.DataFrame(
        [[getattr(row, name) for name in ROW_COLUMNS] for row in record.rows],
        columns=list(ROW_COLUMNS),
    )


def write_run(record: RunRecord, output_dir: PathLike) -> Dict[str, Path]:
    """JSONL 与 CSV 两份逐轮记录，以及 summary JSON"""
    output_dir = Path(output_dir)
    stem = run_stem(record.base_seed)
    jsonl = write_jsonl(
        output_dir / f"{stem}.jsonl", (row.to_json_dict() for row in record.rows)
    )
    csv = output_dir / f"{stem}.csv"
    rows_frame(record).to_csv(csv, index=False, float_format=FLOAT_FORMAT)
    summary = write_json(output_dir / f"{stem}_summary.json", record.summary())
    return {"jsonl": jsonl, "csv": csv, "summary": summary}


def write_run_meta(
    output_dir: PathLike, command: str, extra: Optional[Dict[str, Any]] = None
) -> Path:
    meta = {
        "command": command,
        "argv": sys.argv,
        "created_at": datetime.now(timezone.utc).isoformat(),
        "python": platform.python_version(),
        "numpy": np.__version__,
        "pandas": pd.__version__,
        **(extra or {}),
    }
    return write_json(Path(output_dir) / "run_meta.json", meta)


def write_reports(reports: Sequence[CheckReport], output_dir: PathLike) -> Dict[str, Path]:
    output_dir = Path(output_dir)
    payload = [report.to_json_dict() for report in reports]
    return {
        "reports": write_json(output_dir / "verify_reports.json", payload),
        "jsonl": write_jsonl(output_dir / "verify_reports.jsonl", payload),
    }


def aggregate_sweep(rows: List[Dict[str, Any]]) -> pd.DataFrame:
    """按取值聚合：均值与标准误（单个种子时标准误为 0）"""
    frame = pd.DataFrame(rows, columns=list(SWEEP_COLUMNS))
    grouped = frame.groupby("value", sort=False)
    aggregate = grouped.size().rename("n_seeds").to_frame()
    for metric in AGGREGATE_METRICS:
        stats = grouped[metric]
        aggregate[f"{metric}_mean"] = stats.mean()
        aggregate[f"{metric}_se"] = (stats.std(ddof=1) / np.sqrt(stats.count())).fillna(0.0)
    aggregate.insert(0, "axis", frame["axis"].iloc[0])
    return aggregate.reset_index()


def write_sweep(rows: List[Dict[str, Any]], output_dir: PathLike) -> Dict[str, Path]:
    output_dir = Path(output_dir)
    output_dir.mkdir(parents=True, exist_ok=True)
    runs = output_dir / "sweep_runs.csv"
    pd.DataFrame(rows, columns=list(SWEEP_COLUMNS)).to_csv(
        runs, index=False, float_format=FLOAT_FORMAT
    )
    aggregate = output_dir / "sweep_aggregate.csv"
    aggregate_sweep(rows).to_csv(aggregate, index=False, float_format=FLOAT_FORMAT)
    jsonl = write_jsonl(output_dir / "sweep_runs.jsonl", rows)
    return {"runs": runs, "aggregate": aggregate, "jsonl": jsonl}
