from app.theory.constants import (
    Abc,
    ConstantsReport,
    ConstantsSetting,
    IterationBudget,
    compute_constants,
    iteration_budget,
)


__all__ = [
    "Abc",
    "ConstantsReport",
    "ConstantsSetting",
    "IterationBudget",
    "compute_constants",
    "iteration_budget",
]
