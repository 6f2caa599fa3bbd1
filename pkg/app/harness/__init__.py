from app.harness.commands import (
    EXIT_FAILED,
    EXIT_OK,
    EXIT_USAGE,
    cmd_constants,
    cmd_run,
    cmd_sweep,
    cmd_verify,
)
from app.harness.experiment import ExperimentConfig, SweepSpec, resolve


__all__ = [
    "EXIT_FAILED",
    "EXIT_OK",
    "EXIT_USAGE",
    "ExperimentConfig",
    "SweepSpec",
    "cmd_constants",
    "cmd_run",
    "cmd_sweep",
    "cmd_verify",
    "resolve",
]
