import pytest

from app.schema import CheckStatus
from app.verify.pipeline import PipelineBudget, binomial_margin, check_global_barrier_pipeline


def test_binomial_margin():
    assert binomial_margin(20) == pytest.approx(0.2236, abs=1e-4)
    assert binomial_margin(1) == 1.0


def test_exact_pipeline_certifies_gap(bandit_mdp):
    """Tests that barrier ascent to ε_opt leaves a global gap of at most ε"""
    report = check_global_barrier_pipeline(
        bandit_mdp, 0.25, mode="exact", budget=PipelineBudget(max_iterations=20_000)
    )
    assert report.passed, str(report)
    assert report.check_name == "global_barrier_exact"
    assert report.measured <= 0.25
    assert report.bound == pytest.approx(0.25)
    assert report.details["lambda"] == pytest.approx(0.2 * 0.25 / 2)


def test_exact_pipeline_out_of_budget(bandit_mdp):
    report = check_global_barrier_pipeline(
        bandit_mdp, 0.25, mode="exact", budget=PipelineBudget(max_iterations=1)
    )
    assert report.status == CheckStatus.INCONCLUSIVE
    assert "gap" in report.details


def test_stochastic_pipeline(bandit_mdp):
    budget = PipelineBudget(stochastic_iterations=300, m=8, n_seeds=3)
    report = check_global_barrier_pipeline(
        bandit_mdp, 0.25, mode="stochastic", budget=budget, base_seed=4, jobs=1
    )
    assert report.check_name == "global_barrier_stochastic"
    assert report.passed, str(report)
    assert len(report.details["gaps"]) == 3
    assert report.margin == pytest.approx(binomial_margin(3))


def test_stochastic_pipeline_is_reproducible(bandit_mdp):
    budget = PipelineBudget(stochastic_iterations=20, m=2, n_seeds=2)
    first = check_global_barrier_pipeline(
        bandit_mdp, 0.25, mode="stochastic", budget=budget, base_seed=1, jobs=1
    )
    second = check_global_barrier_pipeline(
        bandit_mdp, 0.25, mode="stochastic", budget=budget, base_seed=1, jobs=2
    )
    assert first.details["gaps"] == second.details["gaps"]
