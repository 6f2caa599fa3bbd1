from app.verify.checks import (
    check_abc,
    check_els,
    check_exact_fosp_rate,
    check_pgt_equivalence,
    check_smoothness_lipschitz,
    check_theorem_bound,
    check_truncation,
    check_unbiasedness,
    check_weak_gd_along_run,
    estimate_fisher_min_eig,
)
from app.verify.mutations import MUTATIONS, get_mutation, mutation_names
from app.verify.pipeline import PipelineBudget, check_global_barrier_pipeline
from app.verify.report import CheckReport
from app.verify.suite import BaseCheck, CheckCollection, VerifyContext, default_suite


__all__ = [
    "BaseCheck",
    "CheckCollection",
    "CheckReport",
    "MUTATIONS",
    "PipelineBudget",
    "VerifyContext",
    "check_abc",
    "check_els",
    "check_exact_fosp_rate",
    "check_global_barrier_pipeline",
    "check_pgt_equivalence",
    "check_smoothness_lipschitz",
    "check_theorem_bound",
    "check_truncation",
    "check_unbiasedness",
    "check_weak_gd_along_run",
    "default_suite",
    "estimate_fisher_min_eig",
    "get_mutation",
    "mutation_names",
]
