import numpy as np
import pytest

from app.estimator.base import EstimatorConfig, WelfordState
from app.estimator.survey import moment_survey
from app.mdp.dp import exact_truncated_gradient
from app.policy.factory import PolicyFactory
from app.schema import EstimatorKind, PolicyFamily


@pytest.fixture
def estimator() -> EstimatorConfig:
    return EstimatorConfig(kind=EstimatorKind.GPOMDP, m=2, H=6)


def test_survey_needs_enough_samples(two_state_mdp, random_policy, estimator):
    with pytest.raises(ValueError, match="at least 100"):
        moment_survey(two_state_mdp, random_policy, estimator, 50, base_seed=0)


def test_survey_is_independent_of_jobs(two_state_mdp, random_policy, estimator):
    """Tests that chunked accumulation gives bit-identical statistics for any thread count"""
    sequential = moment_survey(
        two_state_mdp, random_policy, estimator, 600, base_seed=5, jobs=1
    )
    threaded = moment_survey(two_state_mdp, random_policy, estimator, 600, base_seed=5, jobs=4)
    np.testing.assert_array_equal(sequential.mean, threaded.mean)
    assert sequential.second_moment == threaded.second_moment
    assert sequential.variance == threaded.variance


def test_survey_mean_is_close_to_truncated_gradient(two_state_mdp, random_policy, estimator):
    stats = moment_survey(two_state_mdp, random_policy, estimator, 4000, base_seed=2)
    target = exact_truncated_gradient(two_state_mdp, random_policy, 6)
    error = float(np.linalg.norm(stats.mean - target))
    assert error <= 6.0 * np.sqrt(stats.variance / stats.n_samples) + 1e-12


def test_second_moment_decomposes(two_state_mdp, random_policy, estimator):
    """Tests E|g|^2 ≈ Var + |E g|^2 up to sampling noise"""
    stats = moment_survey(two_state_mdp, random_policy, estimator, 2000, base_seed=8)
    reconstructed = stats.variance + float(np.dot(stats.mean, stats.mean))
    assert stats.second_moment == pytest.approx(reconstructed, rel=1e-9)


def test_single_action_survey_is_degenerate(single_action_mdp):
    policy = PolicyFactory.zeros(PolicyFamily.SOFTMAX_TABULAR, num_states=2, num_actions=1)
    stats = moment_survey(
        single_action_mdp, policy, EstimatorConfig(kind="reinforce", H=4), 100, base_seed=1
    )
    assert stats.second_moment == 0.0
    assert stats.variance == 0.0
    assert stats.to_json_dict()["estimator"] == "reinforce"


def test_welford_merge_matches_sequential():
    samples = np.random.default_rng(0).normal(size=(50, 3))
    whole = WelfordState(3)
    left, right = WelfordState(3), WelfordState(3)
    for i, sample in enumerate(samples):
        whole.update(sample)
        (left if i < 20 else right).update(sample)
    merged = left.merge(right).to_stats()
    direct = whole.to_stats()
    np.testing.assert_allclose(merged.mean, direct.mean)
    assert merged.second_moment == pytest.approx(direct.second_moment)
    assert merged.variance == pytest.approx(direct.variance)
    assert merged.std_error_second_moment == pytest.approx(direct.std_error_second_moment)
