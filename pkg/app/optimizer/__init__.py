from app.optimizer.hyperparams import (
    BarrierHyperparams,
    FospHyperparams,
    hyperparams_for_fosp,
    hyperparams_for_global_barrier,
)
from app.optimizer.runner import RunRecord, RunRow, ascend_until, run_pg
from app.optimizer.schedule import StepSchedule, step_size


__all__ = [
    "BarrierHyperparams",
    "FospHyperparams",
    "RunRecord",
    "RunRow",
    "StepSchedule",
    "ascend_until",
    "hyperparams_for_fosp",
    "hyperparams_for_global_barrier",
    "run_pg",
    "step_size",
]
