import math

import numpy as np
import pytest

from app.config import config
from app.exceptions import ConfigError
from app.mdp.benchmarks import BENCHMARK_GAMMA, REFERENCE_GAMMA
from app.schema import CheckStatus, EstimatorKind
from app.verify.mutations import get_mutation
from app.verify.suite import (
    ElsCheck,
    FisherCheck,
    PgtEquivalenceCheck,
    UnbiasednessCheck,
    VerifyContext,
    default_suite,
)


@pytest.fixture
def small_budget(monkeypatch):
    """把验证预算缩小到测试规模"""
    monkeypatch.setattr(config.verify, "n_samples", 200)
    monkeypatch.setattr(config.verify, "n_pairs", 20)
    monkeypatch.setattr(config.verify, "n_seeds", 2)
    monkeypatch.setattr(config.verify, "run_T", 40)
    monkeypatch.setattr(config.verify, "stochastic_T", 10)
    monkeypatch.setattr(config.verify, "rate_checkpoints", [10, 40])


def test_default_suite_names():
    names = default_suite().names()
    assert names[0] == "unbiasedness"
    assert {"fisher_gaussian", "global_barrier_exact", "global_barrier_stochastic"} <= set(names)
    assert len(names) == len(set(names))


def test_unknown_check():
    with pytest.raises(ConfigError) as exc:
        default_suite().get_check("convexity")
    assert exc.value.path == "/check"
    assert "unbiasedness" in exc.value.message


def test_duplicate_check_is_skipped():
    suite = default_suite()
    count = len(suite.names())
    suite.add_check(ElsCheck())
    assert len(suite.names()) == count


def test_seed_for_is_stable():
    context = VerifyContext(base_seed=3)
    assert context.seed_for("abc") == VerifyContext(base_seed=3).seed_for("abc")
    assert context.seed_for("abc") != context.seed_for("els")


def test_kernel_for_matches_target_only():
    context = VerifyContext(mutation=get_mutation("off_by_one_discount"))
    assert context.kernel_for("unbiasedness", EstimatorKind.GPOMDP) is not None
    assert context.kernel_for("unbiasedness", EstimatorKind.PGT) is None
    assert context.kernel_for("pgt_equivalence", EstimatorKind.GPOMDP) is None


def test_unbiasedness_check_combines_all_estimators():
    report = UnbiasednessCheck()(VerifyContext())
    assert report.passed, str(report)
    assert set(report.details["parts"]) == {kind.value for kind in EstimatorKind}


def test_unbiasedness_check_catches_mutation():
    context = VerifyContext(mutation=get_mutation("wrong_lambda_scale"))
    report = UnbiasednessCheck()(context)
    assert report.failed
    assert report.details["worst"] == "barrier_gpomdp"


def test_pgt_check_catches_mutation(small_budget):
    context = VerifyContext(mutation=get_mutation("drop_causal_mask"), horizon=8)
    assert PgtEquivalenceCheck()(context).failed
    assert PgtEquivalenceCheck()(VerifyContext(horizon=8)).passed


def test_fisher_checks():
    context = VerifyContext()
    assert FisherCheck()(context).status == CheckStatus.INCONCLUSIVE
    gaussian = default_suite().get_check("fisher_gaussian")(context)
    assert gaussian.passed
    assert gaussian.check_name == "fisher_gaussian"
    assert gaussian.measured == pytest.approx(min(context.mdp.initial_dist))


@pytest.mark.parametrize(
    "name",
    ["els", "abc", "smoothness_lipschitz", "truncation", "weak_gd", "exact_fosp_rate", "theorem_bound"],
)
def test_checks_pass_on_default_context(name, small_budget):
    """Tests that each check passes at a reduced budget on the default benchmark"""
    report = default_suite().execute(name, VerifyContext(jobs=1))
    assert report.passed, str(report)


def test_global_barrier_check(bandit_mdp):
    context = VerifyContext.for_mdp(bandit_mdp, jobs=1)
    report = default_suite().execute("global_barrier_exact", context)
    assert report.passed, str(report)


def test_execute_all_keeps_order(small_budget):
    suite = default_suite()
    names = ["fisher", "els", "fisher_gaussian"]
    reports = suite.execute_all(VerifyContext(jobs=3), names)
    assert [report.check_name for report in reports] == names


def test_exact_run_is_shared(small_budget):
    context = VerifyContext(jobs=1)
    assert context.exact_run() is context.exact_run()
    assert context.exact_run().T == 40


def test_constant_checks_use_reference_discount(small_budget):
    """Tests that ABC and truncation run at γ = 0.9, where ν = 500 and L = 150"""
    context = VerifyContext(jobs=1)
    assert context.reference_mdp.gamma == pytest.approx(REFERENCE_GAMMA)
    assert context.mdp.gamma == pytest.approx(BENCHMARK_GAMMA)

    abc = default_suite().execute("abc", context)
    assert abc.passed, str(abc)
    for part in abc.details["parts"].values():
        assert part["details"]["nu"] == pytest.approx(500.0)

    truncation = default_suite().execute("truncation", context)
    assert truncation.passed, str(truncation)
    assert truncation.bound == pytest.approx(math.log(0.9) + 0.01)


def test_user_mdp_replaces_reference(bandit_mdp):
    context = VerifyContext.for_mdp(bandit_mdp, jobs=1)
    for mdp in (context.reference_mdp, context.enumeration_mdp):
        assert mdp.gamma == bandit_mdp.gamma
        np.testing.assert_array_equal(mdp.transitions, bandit_mdp.transitions)
